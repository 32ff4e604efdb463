import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanood.datasets import LabeledDataset, gen_five_peaks, gen_lshape
from kanood.detector import (
    DetectorConfig,
    KanDetector,
    PartitionedDetector,
    bundle_from_dict,
    bundle_to_dict,
    classify,
    delta_matrix,
    fit_detector,
    ind_score,
    partitioned_score,
    quantile_threshold,
    reduce,
)
from kanood.network import clone_weights, init_network
from kanood.spline import basis_eval


def random_pair(shape=(2, 3, 1), seed=0, grid_size=6):
    untrained = init_network(list(shape), grid_size=grid_size, seed=seed)
    trained = clone_weights(untrained)
    rng = np.random.default_rng(seed + 100)
    for layer in trained.layers:
        layer.coeffs += rng.normal(0, 0.05, layer.coeffs.shape)
        layer.base_weights += rng.normal(0, 0.05, layer.base_weights.shape)
    return KanDetector(trained, untrained)


@pytest.mark.parametrize("fn,want", [("min", 0.0), ("mean", 1.0), ("median", 1.0), ("max", 2.0)])
def test_reducers(fn, want):
    assert reduce(np.array([0.0, 1.0, 2.0]), fn) == want


def test_median_of_even_count_is_midpoint():
    assert reduce(np.array([4.0, 1.0, 2.0, 10.0]), "median") == 3.0


def test_unknown_reduction():
    with pytest.raises(ValueError, match="unknown reduction"):
        reduce(np.zeros(2), "mode")


@pytest.mark.parametrize("scoring", ["min", "mean", "median", "max"])
def test_identical_networks_score_zero(scoring):
    net = init_network([3, 4, 2], grid_size=8, seed=1)
    det = KanDetector(clone_weights(net), net, scoring)
    x = np.random.default_rng(0).uniform(-1.5, 1.5, (100, 3))
    assert all(np.all(d == 0.0) for d in det.delta_matrix(x))
    np.testing.assert_array_equal(det.score(x), 0.0)


def test_unit_coefficient_difference_gives_basis_function():
    net = init_network([1, 1], grid_size=10, seed=0)
    trained = clone_weights(net)
    j = 4
    trained.layers[0].coeffs[0, 0, j] += 1.0
    det = KanDetector(trained, net)
    xs = np.linspace(-1, 1, 101)
    delta = np.array([delta_matrix(det, np.array([x]))[0][0, 0] for x in xs])
    np.testing.assert_allclose(delta, basis_eval(net.grid, xs)[:, j], atol=1e-14)


def test_delta_bounded_by_coefficient_expansion():
    det = random_pair(shape=(2, 1), seed=3)
    x = np.random.default_rng(1).uniform(-1, 1, (50, 2))
    delta = det.delta_matrix(x)[0]
    layer_t, layer_u = det.trained.layers[0], det.untrained.layers[0]
    bases = basis_eval(layer_t.grid, x)
    bound = np.einsum("bpi,pqi->bpq", bases, np.abs(layer_t.coeffs - layer_u.coeffs))
    assert np.max(delta - bound) < 1e-10
    # equality when every coefficient difference has the same sign
    same = clone_weights(det.untrained)
    same.layers[0].coeffs += np.abs(layer_t.coeffs - layer_u.coeffs)
    eq = KanDetector(same, det.untrained).delta_matrix(x)[0]
    np.testing.assert_allclose(eq, bound, atol=1e-12)


def test_residual_excluded_by_default():
    untrained = init_network([1, 1], grid_size=5, seed=0)
    trained = clone_weights(untrained)
    trained.layers[0].base_weights[:] = 3.0
    x = np.array([[0.5]])
    assert KanDetector(trained, untrained).score(x)[0] == 0.0
    assert KanDetector(trained, untrained, include_residual=True).score(x)[0] > 0


def test_scores_pool_all_layers():
    det = random_pair(shape=(2, 3, 1), seed=5)
    x = np.array([[0.1, -0.3]])
    d = delta_matrix(det, x[0])
    assert [m.shape for m in d] == [(2, 3), (3, 1)]
    flat = np.concatenate([m.ravel() for m in d])
    for fn in ("min", "mean", "median", "max"):
        det.scoring = fn
        assert ind_score(det, x[0]) == pytest.approx(reduce(flat, fn))


def test_mismatched_pair_rejected():
    with pytest.raises(ValueError, match="share shape"):
        KanDetector(init_network([2, 1]), init_network([3, 1]))
    with pytest.raises(ValueError, match="expected input with 2"):
        random_pair(shape=(2, 1)).score(np.zeros((1, 3)))


def test_classify_boundary_and_monotone():
    det = random_pair(shape=(2, 1), seed=2)
    x = np.random.default_rng(0).uniform(-1, 1, (40, 2))
    s = det.score(x)
    assert classify(det, x[0], float(s[0])) is True
    assert classify(KanDetector(det.untrained, det.untrained), x[0], 1e-9) is False
    lams = np.sort(np.concatenate([s, [0.0, 1.0]]))
    verdicts = np.array([classify(det, x, lam) for lam in lams])
    assert np.all(verdicts[1:] <= verdicts[:-1])  # raising lambda never turns OOD into InD
    with pytest.raises(ValueError, match="finite"):
        classify(det, x, np.nan)


def test_partitioned_single_member_matches_member():
    det = random_pair(shape=(3, 1), seed=4)
    pdet = PartitionedDetector([det])
    x = np.random.default_rng(2).uniform(-1, 1, (100, 3))
    np.testing.assert_array_equal(pdet.score(x), det.score(x))
    assert partitioned_score(pdet, x[0]) == ind_score(det, x[0])


def test_max_aggregation_and_monotone_containment():
    a, b, c = (random_pair(shape=(2, 1), seed=s) for s in (1, 2, 3))
    x = np.random.default_rng(3).uniform(-1, 1, (200, 2))
    two = PartitionedDetector([a, b], aggregation="max", shared_untrained=False)
    three = PartitionedDetector([a, b, c], aggregation="max", shared_untrained=False)
    np.testing.assert_array_equal(two.score(x), np.maximum(a.score(x), b.score(x)))
    assert np.all(three.score(x) >= two.score(x))


def test_members_must_share_scoring():
    a, b = random_pair(seed=1), random_pair(seed=2)
    b.scoring = "max"
    with pytest.raises(ValueError, match="scoring"):
        PartitionedDetector([a, b])


def test_fit_five_peaks_banding():
    train, test = gen_five_peaks(1000, 0)
    pdet = fit_detector(train, DetectorConfig(grid_size=200, histogram_norm=False), seed=0)
    xs = np.linspace(-1, 1, 2001)
    s = pdet.score(xs[:, None])
    for i, c in enumerate((-0.8, -0.4, 0.0, 0.4, 0.8)):
        near = np.abs(xs - c) <= 0.1
        if i < 2:
            assert np.all(s[near] >= 1e-3)
        else:
            assert np.all(s[near] < 1e-3)


def test_untrained_network_never_mutated():
    train, test = gen_five_peaks(300, 1)
    cfg = DetectorConfig(grid_size=50, partitions=2)
    pdet = fit_detector(train, cfg, seed=3)
    reference = init_network([1, 1], grid_size=50, seed=3)
    before = pdet.detectors[0].untrained.layers[0].coeffs.tobytes()
    assert before == reference.layers[0].coeffs.tobytes()
    for _ in range(3):
        pdet.score(test.features)
    assert pdet.detectors[0].untrained.layers[0].coeffs.tobytes() == before
    assert pdet.detectors[1].untrained is pdet.detectors[0].untrained


def test_class_based_partitions_are_exhaustive_and_disjoint():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (90, 2))
    labels = np.repeat([0, 1, 2], 30)
    data = LabeledDataset(x, labels=labels, targets=np.ones(90))
    pdet = fit_detector(data, DetectorConfig(grid_size=10, partitioning_method="class_based"), seed=0)
    assert pdet.partition_count == 3
    assert pdet.partition_sizes == [30, 30, 30]
    np.testing.assert_array_equal(pdet.classes, [0, 1, 2])


def test_lshape_kmeans_centroids_land_in_distinct_arms():
    train, _ = gen_lshape(1000, 0)
    pdet = fit_detector(train, DetectorConfig(grid_size=20, partitions=2, task="constant"), seed=0)
    assign = pdet.cluster_model.assign(pdet.prepare(train.features))
    majority = [np.bincount(assign[train.labels == arm], minlength=2).argmax() for arm in (0, 1)]
    assert majority[0] != majority[1]


def test_lshape_two_partitions_separate_corner():
    train, corner = gen_lshape(2000, 0)
    pdet = fit_detector(train, DetectorConfig(partitions=2, task="constant"), seed=0)
    s_train = pdet.score(train.features)
    assert np.all(pdet.score(corner.features) < np.quantile(s_train, 0.05))


def test_fit_rejects_bad_inputs():
    data = LabeledDataset(np.zeros((3, 1)), targets=np.zeros(3))
    with pytest.raises(ValueError, match="partitions=5"):
        fit_detector(data, DetectorConfig(partitions=5))
    with pytest.raises(ValueError, match="labels"):
        fit_detector(data, DetectorConfig(partitioning_method="class_based"))


@pytest.mark.parametrize(
    "kwargs,field",
    [({"grid_size": 0}, "grid_size"), ({"partitions": 0}, "partitions"), ({"scoring": "mode"}, "scoring"),
     ({"aggregation": "sum"}, "aggregation"), ({"partitioning_method": "dbscan"}, "partitioning_method"),
     ({"histogram_bins": 0}, "histogram_bins"), ({"learning_rate": -1}, "learning_rate"),
     ({"domain": (1, -1)}, "domain"), ({"threshold": float("inf")}, "threshold")],
)
def test_config_validation_names_field(kwargs, field):
    with pytest.raises(ValueError, match=field):
        DetectorConfig(**kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [{"grid_size": 10}, {"grid_size": 200}, {"partitions": 200}, {"learning_rate": 1e-4},
     {"learning_rate": 0.1}, {"epochs": 100}, {"histogram_bins": 1}, {"histogram_bins": 100}],
)
def test_search_space_bounds_are_legal(kwargs):
    DetectorConfig(**kwargs)


def test_config_round_trip_rejects_unknown():
    cfg = DetectorConfig(grid_size=30, hidden=[4], domain=(-2, 2))
    assert DetectorConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError, match="unknown detector keys"):
        DetectorConfig.from_dict({"grid": 5})


def test_quantile_threshold():
    train, _ = gen_five_peaks(400, 0)
    pdet = fit_detector(train, DetectorConfig(grid_size=50, histogram_norm=False), 0)
    lam = quantile_threshold(pdet, train.features, 0.05)
    assert np.mean(pdet.score(train.features) >= lam) >= 0.95


def test_bundle_round_trip_scores_identically():
    train, test = gen_five_peaks(400, 2)
    pdet = fit_detector(train, DetectorConfig(grid_size=40, partitions=3, hidden=[2]), seed=1)
    back = bundle_from_dict(json.loads(json.dumps(bundle_to_dict(pdet))))
    np.testing.assert_array_equal(back.score(test.features), pdet.score(test.features))
    with pytest.raises(ValueError, match="not a detector bundle"):
        bundle_from_dict({"format": "other"})


@given(st.integers(0, 2**16), st.sampled_from(["min", "mean", "median", "max"]))
@settings(max_examples=25, deadline=None)
def test_scores_nonnegative_and_bounded(seed, scoring):
    det = random_pair(shape=(2, 2, 1), seed=seed % 50)
    det.scoring = scoring
    x = np.random.default_rng(seed).uniform(-2, 2, (20, 2))
    s = det.score(x)
    assert np.all(s >= 0)
    flat = np.concatenate([d.reshape(20, -1) for d in det.delta_matrix(x)], axis=1)
    assert np.all(s <= flat.max(axis=1) + 1e-15)
