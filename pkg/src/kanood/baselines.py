"""Comparison detectors: binary occupancy histograms and k-nearest-neighbour distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .detector import reduce
from .spline import SplineGrid


@dataclass
class HistogramDetector:
    """Per-feature occupancy of the ``grid_size`` grid intervals seen during fit.

    A query's score is the scoring function over its per-feature indicators
    (1 where the query's interval was occupied by a training sample).
    """

    occupancy: np.ndarray  # (d, G) bool
    grid: SplineGrid
    scoring: str = "median"

    def intervals(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != len(self.occupancy):
            raise ValueError(f"expected {len(self.occupancy)} features, got {x.shape[1]}")
        g = self.grid
        idx = np.floor((g.clamp(x) - g.domain_min) / g.spacing).astype(np.int64)
        return np.clip(idx, 0, g.grid_size - 1)

    def score(self, x) -> np.ndarray:
        idx = self.intervals(x)
        hits = np.take_along_axis(self.occupancy.T, idx, axis=0).astype(np.float64)
        return reduce(hits, self.scoring, axis=1)


def histogram_fit(data, grid_size: int, domain=(-1.0, 1.0), scoring: str = "median") -> HistogramDetector:
    x = np.atleast_2d(np.asarray(getattr(data, "features", data), dtype=np.float64))
    grid = SplineGrid(float(domain[0]), float(domain[1]), int(grid_size), 0)
    occupancy = np.zeros((x.shape[1], grid.grid_size), dtype=bool)
    det = HistogramDetector(occupancy, grid, scoring)
    idx = det.intervals(x)
    for p in range(x.shape[1]):
        occupancy[p, idx[:, p]] = True
    return det


def histogram_score(det: HistogramDetector, x):
    s = det.score(x)
    return float(s[0]) if np.asarray(x).ndim == 1 else s


def default_k(n_train: int, k: int = 50, reference_size: int = 50_000) -> int:
    """Neighbour count: ``k`` at ``reference_size`` samples or more, scaled down below it."""
    return max(1, min(k, round(k * n_train / reference_size)))


KNN_FEATURE_MAPS = ("none", "l2")


def _l2_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms > 0, norms, 1.0)


@dataclass
class KnnDetector:
    """Score = minus the Euclidean distance to the ``k``-th nearest training sample.

    With ``feature_map="l2"`` every row (training and query) is scaled to unit
    length first, the usual preprocessing of deep nearest-neighbour OOD scoring.
    """

    train_features: np.ndarray
    k: int
    feature_map: str = "none"

    def __post_init__(self):
        if self.feature_map not in KNN_FEATURE_MAPS:
            raise ValueError(f"feature_map must be one of {KNN_FEATURE_MAPS}, got {self.feature_map!r}")
        self._tree = cKDTree(self._map(self.train_features))

    def _map(self, x: np.ndarray) -> np.ndarray:
        return _l2_rows(x) if self.feature_map == "l2" else x

    def score(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.train_features.shape[1]:
            raise ValueError(
                f"expected {self.train_features.shape[1]} features, got {x.shape[1]}"
            )
        dist, _ = self._tree.query(self._map(x), k=[self.k])
        return -dist[:, 0]


def knn_fit(data, k: int | None = None, feature_map: str = "none") -> KnnDetector:
    x = np.atleast_2d(np.asarray(getattr(data, "features", data), dtype=np.float64))
    if len(x) == 0:
        raise ValueError("KNN detector needs a non-empty training set")
    if k is None:
        k = default_k(len(x))
    if not 1 <= k <= len(x):
        raise ValueError(f"k={k} must lie in [1, {len(x)}] (training size)")
    return KnnDetector(x.copy(), int(k), feature_map)


def knn_score(det: KnnDetector, x):
    s = det.score(x)
    return float(s[0]) if np.asarray(x).ndim == 1 else s
