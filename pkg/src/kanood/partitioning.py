"""Dataset partitioners: k-means (Lloyd with k-means++ seeding) and class labels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 300


@dataclass
class ClusterModel:
    centroids: np.ndarray  # (P, d)
    inertia: float
    iterations_run: int
    inertia_history: list[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def assign(self, x) -> np.ndarray | int:
        """Index of the nearest centroid; ties go to the lowest index."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.centroids.shape[1]:
            raise ValueError(
                f"expected {self.centroids.shape[1]} features, got {x2.shape[1]}"
            )
        labels = np.argmin(_sq_dist(x2, self.centroids), axis=1)
        return int(labels[0]) if single else labels


def _sq_dist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def assign(model: ClusterModel, x):
    return model.assign(x)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centroids = [x[rng.integers(n)]]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centroids)


def _repair_empty(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> None:
    # Move each empty centroid onto the point farthest from its own centroid.
    for j in range(len(centroids)):
        if np.any(labels == j):
            continue
        d2 = ((x - centroids[labels]) ** 2).sum(axis=1)
        sizes = np.bincount(labels, minlength=len(centroids))
        d2[sizes[labels] <= 1] = -1.0
        far = int(np.argmax(d2))
        centroids[j] = x[far]
        labels[far] = j


def kmeans_fit(features, n_clusters: int, seed: int = 0, max_iter: int = MAX_ITER) -> ClusterModel:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("kmeans_fit needs a non-empty (n, d) matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if int(n_clusters) != n_clusters or n_clusters < 1:
        raise ValueError(f"number of clusters must be a positive integer, got {n_clusters}")
    if n_clusters > len(x):
        raise ValueError(f"cannot form {n_clusters} clusters from {len(x)} samples")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, int(n_clusters), rng)
    labels = np.argmin(_sq_dist(x, centroids), axis=1)
    _repair_empty(x, centroids, labels)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(len(centroids)):
            centroids[j] = x[labels == j].mean(axis=0)
        history.append(float(((x - centroids[labels]) ** 2).sum()))
        new = np.argmin(_sq_dist(x, centroids), axis=1)
        _repair_empty(x, centroids, new)
        if np.array_equal(new, labels):
            break
        labels = new
    inertia = float(((x - centroids[labels]) ** 2).sum())
    return ClusterModel(centroids, inertia, it, history)


def cluster_partition(features, n_clusters: int, seed: int = 0) -> tuple[list[np.ndarray], ClusterModel]:
    """Row indices of each k-means cluster, plus the fitted model."""
    model = kmeans_fit(features, n_clusters, seed)
    labels = model.assign(np.asarray(features, dtype=np.float64))
    return [np.flatnonzero(labels == j) for j in range(model.n_clusters)], model


def class_partition_indices(labels) -> tuple[list[np.ndarray], np.ndarray]:
    """Row indices per distinct label, with labels in sorted order."""
    if labels is None:
        raise ValueError("class-based partitioning requires labels")
    labels = np.asarray(labels)
    classes = np.unique(labels)
    return [np.flatnonzero(labels == c) for c in classes], classes


def class_partition(data) -> list:
    """Split a LabeledDataset into one subset per distinct label (sorted by label)."""
    idx, _ = class_partition_indices(data.labels)
    return [data.subset(i) for i in idx]
