
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanood.datasets import LabeledDataset
from kanood.partitioning import ClusterModel, assign, class_partition, class_partition_indices, cluster_partition, kmeans_fit


def two_clouds(n=50, seed=0):
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0, 2 * np.pi, 2 * n)
    r = 0.1 * np.sqrt(rng.uniform(0, 1, 2 * n))
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    pts[:n] += -10.0
    pts[n:] += 10.0
    return pts


def test_single_cluster_is_mean():
    x = np.random.default_rng(0).normal(size=(40, 3))
    model = kmeans_fit(x, 1)
    np.testing.assert_allclose(model.centroids[0], x.mean(axis=0), atol=1e-12)
    np.testing.assert_array_equal(model.assign(x), 0)


def test_two_clouds_split_matches_ideal_inertia():
    x = two_clouds()
    model = kmeans_fit(x, 2, seed=3)
    labels = model.assign(x)
    assert len(set(labels[:50])) == 1 and len(set(labels[50:])) == 1 and labels[0] != labels[50]
    ideal = sum(((c - c.mean(axis=0)) ** 2).sum() for c in (x[:50], x[50:]))
    assert model.inertia == pytest.approx(ideal, rel=1e-12)


def test_inertia_history_non_increasing():
    x = np.random.default_rng(1).normal(size=(300, 4))
    model = kmeans_fit(x, 6, seed=0)
    h = np.array(model.inertia_history)
    assert len(h) == model.iterations_run
    assert np.all(np.diff(h) <= 1e-9 * h[0])


def test_seed_determinism():
    x = np.random.default_rng(2).uniform(size=(200, 2))
    a, b = kmeans_fit(x, 4, seed=7), kmeans_fit(x, 4, seed=7)
    np.testing.assert_array_equal(a.centroids, b.centroids)


def test_duplicate_points_never_leave_empty_clusters():
    x = np.array([[0.0, 0.0]] * 10 + [[1.0, 1.0]] * 2 + [[5.0, 5.0]])
    parts, _ = cluster_partition(x, 3, seed=0)
    assert all(len(p) > 0 for p in parts)


def test_assign_exact_and_tie_rule():
    model = ClusterModel(np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]), 0.0, 0)
    assert assign(model, np.array([2.0, 0.0])) == 1
    assert assign(model, np.array([1.0, 0.0])) == 0  # equidistant to 0 and 1


def test_assign_matches_linear_scan():
    rng = np.random.default_rng(4)
    model = ClusterModel(rng.normal(size=(5, 3)), 0.0, 0)
    x = rng.normal(size=(100, 3))
    for xi, got in zip(x, model.assign(x)):
        dists = [float(np.sum((xi - c) ** 2)) for c in model.centroids]
        assert got == dists.index(min(dists))
    with pytest.raises(ValueError, match="3 features"):
        model.assign(np.zeros(2))


@pytest.mark.parametrize("k", [0, 11, 2.5])
def test_invalid_cluster_counts(k):
    with pytest.raises(ValueError):
        kmeans_fit(np.zeros((10, 2)), k)


@given(st.integers(1, 60), st.integers(1, 6), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_partitions_exhaustive_and_disjoint(n, k, seed):
    k = min(k, n)
    x = np.random.default_rng(seed).integers(0, 4, size=(n, 2)).astype(float)  # many duplicates
    parts, _ = cluster_partition(x, k, seed)
    allidx = np.concatenate(parts)
    assert sorted(allidx.tolist()) == list(range(n))


def test_class_partition_sizes_and_order():
    labels = np.array([2, 0, 1, 2, 2, 0])
    idx, classes = class_partition_indices(labels)
    np.testing.assert_array_equal(classes, [0, 1, 2])
    assert [len(i) for i in idx] == [2, 1, 3]
    data = LabeledDataset(np.arange(6.0)[:, None], labels=labels)
    subsets = class_partition(data)
    assert sum(len(s) for s in subsets) == 6
    assert len(class_partition(LabeledDataset(np.zeros((4, 1)), labels=np.zeros(4, int)))) == 1


def test_class_partition_invariant_to_shuffle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 2))
    labels = rng.integers(0, 3, 30)
    perm = rng.permutation(30)
    a = class_partition(LabeledDataset(x, labels=labels))
    b = class_partition(LabeledDataset(x[perm], labels=labels[perm]))
    for sa, sb in zip(a, b):
        assert {tuple(r) for r in sa.features} == {tuple(r) for r in sb.features}


def test_class_partition_requires_labels():
    with pytest.raises(ValueError, match="labels"):
        class_partition_indices(None)
