"""Threshold-free detection metrics and multi-dataset / multi-seed summaries.

Scores follow the "higher means more in-distribution" convention throughout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats


def _as_scores(name: str, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64).ravel()
    if len(s) == 0:
        raise ValueError(f"{name} scores are empty")
    if np.isnan(s).any():
        raise ValueError(f"{name} scores contain NaN")
    return s


def auroc(ind_scores, ood_scores) -> float:
    """P(InD score > OOD score) + P(tie) / 2, computed exactly from counts."""
    ind = _as_scores("InD", ind_scores)
    ood = np.sort(_as_scores("OOD", ood_scores))
    below = np.searchsorted(ood, ind, side="left")
    not_above = np.searchsorted(ood, ind, side="right")
    twice_u = int(below.sum()) + int(not_above.sum())  # 2*below + ties
    return float(Fraction(twice_u, 2 * len(ind) * len(ood)))


def fpr_at_95(ind_scores, ood_scores, tpr: float = 0.95) -> float:
    """Fraction of OOD scores at or above the threshold that keeps ``tpr`` of InD.

    The threshold is the largest InD score ``t`` such that at least ``tpr`` of
    InD scores satisfy ``s >= t``; with ``tpr = 0.95`` that is the sorted InD
    score at zero-based position ``floor(0.05 * n)``.
    """
    ind = np.sort(_as_scores("InD", ind_scores))
    ood = _as_scores("OOD", ood_scores)
    n = len(ind)
    pos = int(math.floor(round((1.0 - tpr) * n, 9)))
    threshold = ind[pos]
    return float(np.count_nonzero(ood >= threshold) / len(ood))


def overall_average(per_dataset) -> tuple[float, float]:
    """Mean of the means and root-mean-square of the standard deviations."""
    arr = np.asarray(per_dataset, dtype=np.float64).reshape(-1, 2)
    if len(arr) == 0:
        raise ValueError("overall_average needs at least one dataset")
    mu, sigma = arr[:, 0], arr[:, 1]
    return float(mu.mean()), float(np.sqrt(np.mean(sigma**2)))


def seed_sweep_stats(per_seed) -> tuple[float, float, float]:
    """``(mu_b, sigma_b, sigma_d)`` from per-seed ``(mu_i, sigma_i)`` pairs.

    ``sigma_b`` averages the within-seed spreads, ``sigma_d`` is the population
    standard deviation of the per-seed means around ``mu_b``.
    """
    arr = np.asarray(per_seed, dtype=np.float64).reshape(-1, 2)
    if len(arr) < 2:
        raise ValueError("seed_sweep_stats needs at least two seeds")
    mu, sigma = arr[:, 0], arr[:, 1]
    mu_b = float(mu.mean())
    return mu_b, float(sigma.mean()), float(np.sqrt(np.mean((mu - mu_b) ** 2)))


def welch_t_test(a, b) -> float:
    """Two-sided p-value of Welch's unequal-variance t-test.

    The t CDF is scipy's regularized incomplete beta evaluation at the
    Welch-Satterthwaite degrees of freedom.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("Welch's t-test needs at least two samples per group")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    if va == 0 and vb == 0:
        raise ValueError("Welch's t-test is undefined when both groups have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    return float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))


# -- reports -----------------------------------------------------------------


@dataclass
class OodResult:
    name: str
    auroc: float
    fpr_at_95: float
    n_ind: int
    n_ood: int
    group: str | None = None


@dataclass
class EvalReport:
    """Per-OOD-set metrics plus the multi-dataset and multi-seed summaries.

    AUROC and FPR values are fractions in [0, 1]. ``overall_mean`` and
    ``overall_std`` follow :func:`overall_average` over the per-set
    ``(mean, std)`` pairs, the spreads being taken across repeated runs.
    """

    method: str
    results: list[OodResult] = field(default_factory=list)
    per_set_std: dict[str, float] = field(default_factory=dict)
    near_mean: float | None = None
    far_mean: float | None = None
    overall_mean: float | None = None
    overall_std: float | None = None
    seed_means: list[tuple[float, float]] | None = None
    mu_b: float | None = None
    sigma_b: float | None = None
    sigma_d: float | None = None
    params: dict = field(default_factory=dict)

    def summarize(self) -> EvalReport:
        pairs = [(r.auroc, self.per_set_std.get(r.name, 0.0)) for r in self.results]
        if pairs:
            self.overall_mean, self.overall_std = overall_average(pairs)
        for group in ("near", "far"):
            vals = [r.auroc for r in self.results if r.group == group]
            setattr(self, f"{group}_mean", float(np.mean(vals)) if vals else None)
        if self.seed_means and len(self.seed_means) >= 2:
            self.mu_b, self.sigma_b, self.sigma_d = seed_sweep_stats(self.seed_means)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.seed_means is not None:
            d["seed_means"] = [list(p) for p in self.seed_means]
        return d


CSV_FIELDS = ["method", "params", "ood_set", "group", "auroc", "auroc_std", "fpr_at_95", "n_ind", "n_ood"]


def reports_to_csv(reports: list[EvalReport]) -> str:
    """Flat CSV with one row per (report, OOD set) and one ``overall`` row per report."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rep in reports:
        params = ";".join(f"{k}={v}" for k, v in rep.params.items())
        for r in rep.results:
            std = rep.per_set_std.get(r.name, 0.0)
            writer.writerow([rep.method, params, r.name, r.group or "", r.auroc, std, r.fpr_at_95, r.n_ind, r.n_ood])
        if rep.overall_mean is not None:
            writer.writerow([rep.method, params, "overall", "", rep.overall_mean, rep.overall_std, "", "", ""])
    return buf.getvalue()
