import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanood import _archive
from kanood.preprocessing import HistogramNormalizer, fit_normalizer


def test_endpoints_map_to_domain():
    x = np.random.default_rng(0).exponential(size=(500, 2))
    norm = fit_normalizer(x, bins=10)
    np.testing.assert_allclose(norm(x.min(axis=0)), [-1, -1])
    np.testing.assert_allclose(norm(x.max(axis=0)), [1, 1])
    np.testing.assert_allclose(norm(x.min(axis=0) - 5), [-1, -1])
    np.testing.assert_allclose(norm(x.max(axis=0) + 5), [1, 1])


def test_median_maps_near_midpoint():
    x = np.random.default_rng(1).lognormal(size=(2000, 1))
    norm = fit_normalizer(x, bins=20)
    # piecewise-linear CDF: the median lands within one bin's probability mass of 0
    counts, _ = np.histogram(x[:, 0], bins=20)
    slack = 2 * counts.max() / len(x)
    assert abs(norm(np.median(x, axis=0))[0]) <= slack


def test_output_is_roughly_uniform():
    x = np.random.default_rng(2).normal(size=(5000, 1))
    y = fit_normalizer(x, bins=50)(x)[:, 0]
    counts, _ = np.histogram(y, bins=10, range=(-1, 1))
    assert counts.min() > 0.5 * counts.max()


def test_custom_domain_and_constant_feature():
    x = np.column_stack([np.linspace(0, 1, 11), np.full(11, 3.0)])
    norm = fit_normalizer(x, bins=5, domain=(0.0, 4.0))
    out = norm(x)
    assert out[:, 0].min() == 0.0 and out[:, 0].max() == 4.0
    np.testing.assert_array_equal(out[:, 1], 2.0)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60), st.integers(1, 30),
       st.floats(-2e3, 2e3), st.floats(-2e3, 2e3))
@settings(max_examples=100, deadline=None)
def test_monotone(values, bins, a, b):
    norm = fit_normalizer(np.array(values)[:, None], bins=bins)
    lo, hi = sorted((a, b))
    ya, yb = norm(np.array([[lo], [hi]]))[:, 0]
    assert ya <= yb
    assert -1.0 <= ya <= 1.0 and -1.0 <= yb <= 1.0


def test_serialization_round_trip():
    x = np.random.default_rng(3).normal(size=(100, 3))
    x[:, 2] = 7.0
    norm = fit_normalizer(x, bins=8)
    back = HistogramNormalizer.from_dict(json.loads(_archive.dumps(norm.to_dict(_archive.encode_array))), _archive.decode_array)
    q = np.random.default_rng(4).normal(size=(20, 3))
    np.testing.assert_array_equal(back(q), norm(q))


@pytest.mark.parametrize(
    "x,kwargs,match",
    [(np.zeros((0, 2)), {}, "non-empty"), (np.zeros((1, 2)), {}, "at least 2"),
     (np.ones((5, 1)), {"bins": 0}, "bins"), (np.array([[np.nan], [1.0]]), {}, "non-finite"),
     (np.ones((5, 1)), {"domain": (1, 0)}, "domain")],
)
def test_fit_errors(x, kwargs, match):
    with pytest.raises(ValueError, match=match):
        fit_normalizer(x, **kwargs)


def test_dimension_mismatch():
    norm = fit_normalizer(np.random.default_rng(0).normal(size=(10, 2)))
    with pytest.raises(ValueError, match="2 features"):
        norm(np.zeros((3, 3)))
