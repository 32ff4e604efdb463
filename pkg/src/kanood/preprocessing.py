"""Histogram normalization onto the spline grid domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class HistogramNormalizer:
    """Per-feature empirical CDF, piecewise linear between histogram edges.

    ``edges[j]`` and ``cdf[j]`` both have ``bins + 1`` entries. Constant
    features have ``edges[j] is None`` and map to the domain midpoint.
    """

    edges: list[np.ndarray | None]
    cdf: list[np.ndarray | None]
    bins: int
    domain: tuple[float, float] = (-1.0, 1.0)

    @property
    def n_features(self) -> int:
        return len(self.edges)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x2.shape[1]}")
        lo, hi = self.domain
        out = np.empty_like(x2)
        for j, (e, c) in enumerate(zip(self.edges, self.cdf)):
            if e is None:
                out[:, j] = 0.5 * (lo + hi)
            else:
                out[:, j] = lo + (hi - lo) * np.interp(x2[:, j], e, c)
        return out[0] if single else out

    __call__ = transform

    def to_dict(self, encode) -> dict:
        return {
            "bins": self.bins,
            "domain": list(self.domain),
            "features": [
                None if e is None else {"edges": encode(e), "cdf": encode(c)}
                for e, c in zip(self.edges, self.cdf)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, decode) -> HistogramNormalizer:
        edges, cdf = [], []
        for f in d["features"]:
            edges.append(None if f is None else decode(f["edges"]))
            cdf.append(None if f is None else decode(f["cdf"]))
        return cls(edges, cdf, int(d["bins"]), tuple(d["domain"]))


def fit_normalizer(features, bins: int = 10, domain=(-1.0, 1.0)) -> HistogramNormalizer:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("fit_normalizer needs a non-empty (n, d) matrix")
    if len(x) < 2:
        raise ValueError("fit_normalizer needs at least 2 samples")
    if int(bins) != bins or bins < 1:
        raise ValueError(f"bins must be a positive integer, got {bins}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if not domain[0] < domain[1]:
        raise ValueError("domain must be an increasing interval")
    edges, cdf = [], []
    for col in x.T:
        lo, hi = col.min(), col.max()
        if lo == hi:
            edges.append(None)
            cdf.append(None)
            continue
        counts, e = np.histogram(col, bins=int(bins), range=(lo, hi))
        edges.append(e)
        cdf.append(np.concatenate([[0.0], np.cumsum(counts)]) / len(col))
    return HistogramNormalizer(edges, cdf, int(bins), (float(domain[0]), float(domain[1])))
