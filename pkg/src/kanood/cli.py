"""Command-line harness: ``kanood fit | score | eval | curve``."""

from __future__ import annotations

import functools
import json
import logging
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import yaml

from . import _archive
from .datasets import DelimitedSchema, load_delimited
from .detector import fit_detector, load_bundle, quantile_threshold, save_bundle
from .experiment import evaluate_run
from .metrics import reports_to_csv
from .runconfig import OUTPUT_DIR_ENV, RunConfig


def _user_errors(fn):
    """Turn configuration and input errors into a clean nonzero exit."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, IndexError, KeyError, OSError, yaml.YAMLError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _parse_seeds(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}", param_hint="--seeds") from None


def _load_config(path: str, seeds: str | None) -> RunConfig:
    cfg = RunConfig.from_file(path)
    override = _parse_seeds(seeds)
    if override:
        cfg.seeds = override
    return cfg


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_or_echo(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        _archive.atomic_write_text(out, text)


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose: int):
    """Out-of-distribution detection with trained-vs-untrained KAN pairs."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seeds", default=None, help="Comma-separated seeds; the first one initializes the networks.")
@click.option("--out", default=None, help=f"Bundle path (default: output dir / bundle name; ${OUTPUT_DIR_ENV} overrides the dir).")
@click.option("--lambda-quantile", "lambda_quantile", type=click.FloatRange(0.0, 1.0), default=None,
              help="Store lambda at this quantile of the training scores in the bundle.")
@_user_errors
def fit(config_path: str, seeds: str | None, out: str | None, lambda_quantile: float | None):
    """Fit a detector on the configured dataset and write a bundle."""
    cfg = _load_config(config_path, seeds)
    data = cfg.dataset.build(cfg.resolved_data_seeds[0], cfg.base_dir)
    t0 = time.perf_counter()
    det = fit_detector(data.train, cfg.detector, cfg.seeds[0])
    wall = time.perf_counter() - t0
    if lambda_quantile is not None:
        det.config = replace(det.config, threshold=quantile_threshold(det, data.train.features, lambda_quantile))
    path = Path(out) if out else cfg.output.resolve_dir() / cfg.output.bundle
    save_bundle(det, path)
    summary = {
        "bundle": str(path),
        "seed": cfg.seeds[0],
        "partition_sizes": det.partition_sizes,
        "final_losses": [h[-1] if h else None for h in det.train_losses],
        "threshold": det.config.threshold,
        "wall_time_s": round(wall, 3),
    }
    click.echo(json.dumps(summary, indent=1))


@main.command()
@click.option("--bundle", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, help="Output CSV (default: stdout).")
@click.option("--lambda", "threshold", type=float, default=None,
              help="Add an InD/OOD verdict column (score >= lambda is InD); defaults to the bundle's lambda if it has one.")
@click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML column schema of the input file (default: comma-separated, no header, all features).")
@_user_errors
def score(bundle: str, input_path: str, out: str | None, threshold: float | None, schema_path: str | None):
    """Score every row of a delimited feature file."""
    det = load_bundle(bundle)
    schema = DelimitedSchema.from_file(schema_path) if schema_path else DelimitedSchema(header=False)
    data = load_delimited(input_path, schema)
    if data.n_features != det.n_features:
        raise ValueError(f"{input_path}: bundle expects {det.n_features} features, input has {data.n_features}")
    if threshold is None and det.config is not None:
        threshold = det.config.threshold
    if threshold is not None and not np.isfinite(threshold):
        raise ValueError("--lambda must be finite")
    s = det.score(data.features)
    lines = ["row,score" + (",verdict" if threshold is not None else "")]
    for i, v in enumerate(s):
        row = f"{i},{_fmt(v)}"
        if threshold is not None:
            row += ",InD" if v >= threshold else ",OOD"
        lines.append(row)
    _write_or_echo("\n".join(lines) + "\n", out)


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seeds", default=None, help="Comma-separated initialization seeds (overrides the config).")
@click.option("--out", default=None, help=f"Output directory (overrides ${OUTPUT_DIR_ENV} and the config).")
@_user_errors
def eval_cmd(config_path: str, seeds: str | None, out: str | None):
    """Run the configured sweep and write the JSON report and flat CSV."""
    cfg = _load_config(config_path, seeds)
    t0 = time.perf_counter()
    reports, errors = evaluate_run(cfg)
    out_dir = cfg.output.resolve_dir(out)
    report = {
        "config": cfg.to_dict(),
        "reports": [r.to_dict() for r in reports],
        "errors": errors,
    }
    _archive.atomic_write_text(out_dir / cfg.output.report, _archive.dumps(report))
    _archive.atomic_write_text(out_dir / cfg.output.csv, reports_to_csv(reports))
    for r in reports:
        params = " ".join(f"{k}={v}" for k, v in r.params.items())
        click.echo(f"{r.method:<9} {params:<28} overall AUROC {100 * r.overall_mean:6.2f} +- {100 * r.overall_std:.2f}")
    for e in errors:
        click.echo(f"failed: {e}", err=True)
    click.echo(f"wrote {out_dir / cfg.output.report} and {out_dir / cfg.output.csv} ({time.perf_counter() - t0:.1f} s)")


@main.command()
@click.option("--bundle", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, help="Output CSV (default: stdout).")
@click.option("--range", "span", nargs=2, type=float, default=(-1.0, 1.0), show_default=True,
              help="Sweep range applied to every input axis (raw feature units).")
@click.option("--points", type=click.IntRange(min=2), default=1000, show_default=True, help="Grid points per axis.")
@click.option("--lambda", "threshold", type=float, default=None, help="Add an InD/OOD verdict column.")
@_user_errors
def curve(bundle: str, out: str | None, span: tuple[float, float], points: int, threshold: float | None):
    """Dense S(x) sweep of a 1-D or 2-D detector for external plotting."""
    det = load_bundle(bundle)
    d = det.n_features
    if d > 2:
        raise ValueError(f"curve supports detectors with 1 or 2 inputs, this one has {d}; project the data first")
    if not span[0] < span[1]:
        raise ValueError("--range needs LO < HI")
    axis = np.linspace(span[0], span[1], points)
    if d == 1:
        grid = axis[:, None]
        header = "x,score"
    else:
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        grid = np.column_stack([g1.ravel(), g2.ravel()])
        header = "x1,x2,score"
    s = det.score(grid)
    lines = [header + (",verdict" if threshold is not None else "")]
    for row, v in zip(grid, s):
        line = ",".join(_fmt(c) for c in row) + f",{_fmt(v)}"
        if threshold is not None:
            line += ",InD" if v >= threshold else ",OOD"
        lines.append(line)
    _write_or_echo("\n".join(lines) + "\n", out)


if __name__ == "__main__":
    main()
