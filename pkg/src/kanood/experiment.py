"""Benchmark sweeps: fit every (sweep point, seed, data seed) combination and summarize."""

from __future__ import annotations

import logging
from collections import defaultdict

import numpy as np

from .baselines import histogram_fit, knn_fit
from .detector import fit_detector
from .metrics import EvalReport, OodResult, auroc, fpr_at_95
from .preprocessing import fit_normalizer
from .runconfig import BenchmarkData, RunConfig

logger = logging.getLogger(__name__)


def score_sets(score_fn, data: BenchmarkData, errors: list, context: dict) -> list[OodResult]:
    """Metrics of every OOD set against the InD test rows; failing sets land in ``errors``."""
    s_in = score_fn(data.ind_test)
    out = []
    for ood in data.ood_sets:
        try:
            s_out = score_fn(ood.features)
            out.append(OodResult(ood.name, auroc(s_in, s_out), fpr_at_95(s_in, s_out), len(s_in), len(s_out), ood.group))
        except Exception as exc:  # one broken set must not stop the sweep
            errors.append({**context, "ood_set": ood.name, "error": f"{type(exc).__name__}: {exc}"})
            logger.warning("OOD set %s failed: %s", ood.name, exc)
    for name, sets in data.pooled.items():
        try:
            pairs = [(auroc(s_in, s), fpr_at_95(s_in, s)) for s in (score_fn(o.features) for o in sets)]
            a, f = np.mean(pairs, axis=0)
            out.append(OodResult(name, float(a), float(f), len(s_in), len(sets[0].features), sets[0].group))
        except Exception as exc:
            errors.append({**context, "ood_set": name, "error": f"{type(exc).__name__}: {exc}"})
            logger.warning("OOD set %s failed: %s", name, exc)
    return out


def assemble_report(method: str, params: dict, runs: list[list[OodResult]], seed_of_run=None) -> EvalReport:
    """Average repeated runs per OOD set; spreads are population standard deviations.

    ``seed_of_run`` maps each run to its initialization seed; with two or more
    seeds the report carries the per-seed (mean, std) of the overall AUROC.
    """
    by_set: dict[str, list[OodResult]] = defaultdict(list)
    for run in runs:
        for r in run:
            by_set[r.name].append(r)
    results, stds = [], {}
    for name, rs in by_set.items():
        a = np.array([r.auroc for r in rs])
        results.append(
            OodResult(name, float(a.mean()), float(np.mean([r.fpr_at_95 for r in rs])), rs[0].n_ind, rs[0].n_ood, rs[0].group)
        )
        stds[name] = float(a.std())
    report = EvalReport(method, results, stds, params=dict(params))
    if seed_of_run is not None and len(set(seed_of_run)) >= 2:
        per_seed: dict[int, list[float]] = defaultdict(list)
        for seed, run in zip(seed_of_run, runs):
            if run:
                per_seed[seed].append(float(np.mean([r.auroc for r in run])))
        report.seed_means = [(float(np.mean(v)), float(np.std(v))) for _, v in sorted(per_seed.items())]
    return report.summarize()


def evaluate_run(cfg: RunConfig) -> tuple[list[EvalReport], list[dict]]:
    """All reports of a run config plus the per-set failures encountered along the way."""
    data_seeds = cfg.resolved_data_seeds
    data = {ds: cfg.dataset.build(ds, cfg.base_dir) for ds in data_seeds}
    reports, errors = [], []
    for point, dcfg in cfg.combinations():
        runs, seeds = [], []
        for seed in cfg.seeds:
            for ds in data_seeds:
                det = fit_detector(data[ds].train, dcfg, seed)
                ctx = {"method": "kan", **point, "seed": seed, "data_seed": ds}
                runs.append(score_sets(det.score, data[ds], errors, ctx))
                seeds.append(seed)
        reports.append(assemble_report("kan", point, runs, seeds))
        if cfg.baselines.histogram:
            grid = cfg.baselines.histogram_grid_size or dcfg.grid_size
            scoring = cfg.baselines.histogram_scoring or dcfg.scoring
            hruns = []
            for ds in data_seeds:
                x = data[ds].train.features
                norm = fit_normalizer(x, dcfg.histogram_bins, dcfg.domain) if dcfg.histogram_norm else None
                prep = (lambda v, n=norm: n.transform(v)) if norm else (lambda v: v)
                det = histogram_fit(prep(x), grid, dcfg.domain, scoring)
                ctx = {"method": "histogram", **point, "data_seed": ds}
                hruns.append(score_sets(lambda v, d=det, p=prep: d.score(p(v)), data[ds], errors, ctx))
            reports.append(assemble_report("histogram", {**point, "grid_size": grid, "scoring": scoring}, hruns))
    if cfg.baselines.knn:
        kruns = []
        for ds in data_seeds:
            det = knn_fit(data[ds].train, cfg.baselines.knn_k, cfg.baselines.knn_feature_map)
            ctx = {"method": "knn", "data_seed": ds}
            kruns.append(score_sets(det.score, data[ds], errors, ctx))
        params = {"k": det.k, "feature_map": cfg.baselines.knn_feature_map}
        reports.append(assemble_report("knn", params, kruns))
    return reports, errors
