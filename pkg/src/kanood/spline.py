"""Uniform B-spline grids and vectorized basis evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class SplineGrid:
    """Uniform knot grid of ``grid_size`` intervals over a closed domain.

    The knot vector is extended by ``order`` knots on each side at the same
    spacing, which yields ``grid_size + order`` basis functions that form a
    partition of unity on ``[domain_min, domain_max]``.
    """

    domain_min: float = -1.0
    domain_max: float = 1.0
    grid_size: int = 5
    order: int = 3

    def __post_init__(self):
        if not (np.isfinite(self.domain_min) and np.isfinite(self.domain_max)):
            raise ValueError("grid domain must be finite")
        if not self.domain_min < self.domain_max:
            raise ValueError(
                f"domain_min ({self.domain_min}) must be < domain_max ({self.domain_max})"
            )
        if int(self.grid_size) != self.grid_size or self.grid_size < 1:
            raise ValueError(f"grid_size must be a positive integer, got {self.grid_size}")
        if int(self.order) != self.order or self.order < 0:
            raise ValueError(f"order must be a non-negative integer, got {self.order}")

    @property
    def spacing(self) -> float:
        return (self.domain_max - self.domain_min) / self.grid_size

    @property
    def n_basis(self) -> int:
        return self.grid_size + self.order

    @cached_property
    def knots(self) -> np.ndarray:
        j = np.arange(-self.order, self.grid_size + self.order + 1)
        t = self.domain_min + j * self.spacing
        t[self.order] = self.domain_min
        t[self.order + self.grid_size] = self.domain_max
        return t

    def clamp(self, x):
        return np.clip(x, self.domain_min, self.domain_max)


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("spline input contains non-finite values")


def _interval_index(grid: SplineGrid, xc: np.ndarray) -> np.ndarray:
    # Domain interval containing xc; the right endpoint belongs to the last one.
    idx = np.clip(np.floor((xc - grid.domain_min) / grid.spacing).astype(np.int64), 0, grid.grid_size - 1)
    # the division can round across a knot; settle ties against the stored knots
    t = grid.knots[grid.order : grid.order + grid.grid_size + 1]
    idx = idx - ((xc < t[idx]) & (idx > 0))
    idx = idx + ((xc >= t[idx + 1]) & (idx < grid.grid_size - 1))
    return idx


def _bases_by_order(grid: SplineGrid, xc: np.ndarray, top: int) -> list[np.ndarray]:
    """Cox-de Boor recursion; returns the basis arrays for orders 0..top."""
    t = grid.knots
    n_intervals = len(t) - 1
    b = np.zeros(xc.shape + (n_intervals,))
    idx = _interval_index(grid, xc) + grid.order
    np.put_along_axis(b, idx[..., None], 1.0, axis=-1)
    out = [b]
    x = xc[..., None]
    for d in range(1, top + 1):
        left = (x - t[: -d - 1]) / (t[d:-1] - t[: -d - 1])
        right = (t[d + 1 :] - x) / (t[d + 1 :] - t[1:-d])
        b = left * b[..., :-1] + right * b[..., 1:]
        out.append(b)
    return out


def basis_eval(grid: SplineGrid, x) -> np.ndarray:
    """Evaluate all ``grid.n_basis`` basis functions at ``x``.

    ``x`` may have any shape; the result has shape ``x.shape + (n_basis,)``.
    Inputs outside the domain are clamped to it first.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x)
    return _bases_by_order(grid, grid.clamp(x), grid.order)[-1]


def basis_grad(grid: SplineGrid, x) -> np.ndarray:
    """Derivatives dB_i/dx, same shape convention as :func:`basis_eval`.

    Outside the domain the clamped basis is constant, so the derivative is zero
    there.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x)
    k = grid.order
    if k == 0:
        return np.zeros(x.shape + (grid.n_basis,))
    xc = grid.clamp(x)
    lower = _bases_by_order(grid, xc, k - 1)[-1]
    t = grid.knots
    # dB_{i,k} = k/(t_{i+k}-t_i) B_{i,k-1} - k/(t_{i+k+1}-t_{i+1}) B_{i+1,k-1}
    left = k / (t[k:-1] - t[: -k - 1])
    right = k / (t[k + 1 :] - t[1:-k])
    grad = left * lower[..., :-1] - right * lower[..., 1:]
    inside = (x >= grid.domain_min) & (x <= grid.domain_max)
    return grad * inside[..., None]
