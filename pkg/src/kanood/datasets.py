"""Synthetic benchmark generators and delimited-text ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml


@dataclass
class LabeledDataset:
    """Feature matrix with optional labels, regression targets and InD flags."""

    features: np.ndarray
    labels: np.ndarray | None = None
    targets: np.ndarray | None = None
    ind_flag: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        n = len(self.features)
        for name, dtype in (("labels", np.int64), ("targets", np.float64), ("ind_flag", bool)):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value, dtype=dtype)
            if len(value) != n:
                raise ValueError(f"{name} has {len(value)} rows, features have {n}")
            setattr(self, name, value)

    def __len__(self) -> int:
        return len(self.features)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> LabeledDataset:
        idx = np.asarray(idx)

        def take(a):
            return None if a is None else a[idx]

        return LabeledDataset(
            self.features[idx],
            take(self.labels),
            take(self.targets),
            take(self.ind_flag),
            dict(self.provenance),
        )


# -- five Gaussian peaks ----------------------------------------------------

FIVE_PEAK_CENTERS = (-0.8, -0.4, 0.0, 0.4, 0.8)


def five_peak_targets(x, centers=FIVE_PEAK_CENTERS, width=0.07, amplitude=1.0) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(centers)
    return amplitude * np.exp(-((x[..., None] - c) ** 2) / (2 * width**2)).sum(axis=-1)


def peak_regions(centers=FIVE_PEAK_CENTERS, region_halfwidth=0.2) -> list[tuple[float, float]]:
    return [(c - region_halfwidth, c + region_halfwidth) for c in centers]


def gen_five_peaks(
    n: int,
    seed: int,
    centers=FIVE_PEAK_CENTERS,
    width: float = 0.07,
    amplitude: float = 1.0,
    train_peaks=(0, 1),
    region_halfwidth: float = 0.2,
) -> tuple[LabeledDataset, LabeledDataset]:
    """1-D regression toy: a sum of Gaussian bumps over [-1, 1].

    Training inputs are uniform over the regions of the ``train_peaks``; the
    test set is uniform over [-1, 1] and flagged InD inside those regions.
    """
    if n < 10:
        raise ValueError("gen_five_peaks needs n >= 10")
    rng = np.random.default_rng(seed)
    regions = peak_regions(centers, region_halfwidth)
    train_regions = [regions[i] for i in train_peaks]
    which = rng.integers(0, len(train_regions), size=n)
    lo = np.array([train_regions[i][0] for i in which])
    hi = np.array([train_regions[i][1] for i in which])
    x_train = lo + (hi - lo) * rng.random(n)
    x_test = rng.uniform(-1.0, 1.0, size=n)
    in_train = np.zeros(n, dtype=bool)
    for a, b in train_regions:
        in_train |= (x_test >= a) & (x_test <= b)
    prov = {
        "generator": "five_peaks",
        "seed": int(seed),
        "n": int(n),
        "centers": [float(c) for c in centers],
        "width": float(width),
        "amplitude": float(amplitude),
        "train_peaks": [int(i) for i in train_peaks],
        "region_halfwidth": float(region_halfwidth),
    }

    def make(x, flag, split):
        return LabeledDataset(
            x[:, None],
            targets=five_peak_targets(x, centers, width, amplitude),
            ind_flag=flag,
            provenance={**prov, "split": split},
        )

    return make(x_train, np.ones(n, dtype=bool), "train"), make(x_test, in_train, "test")


# -- L-shape ---------------------------------------------------------------


def in_lshape(x, arm_width=0.3) -> np.ndarray:
    x = np.asarray(x)
    inside = (x >= 0.0) & (x <= 1.0)
    return inside.all(axis=1) & ((x[:, 0] <= arm_width) | (x[:, 1] <= arm_width))


def gen_lshape(
    n: int,
    seed: int,
    arm_width: float = 0.3,
    corner=(0.6, 1.0),
    target_value: float = 1.0,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Uniform samples on ``[0,1]x[0,w] U [0,w]x[0,1]`` and an OOD corner cloud.

    The corner square ``corner x corner`` shares both marginals with the L but
    is disjoint from it.
    """
    if n < 10:
        raise ValueError("gen_lshape needs n >= 10")
    if not arm_width < corner[0]:
        raise ValueError("corner must lie outside the L arms")
    rng = np.random.default_rng(seed)
    kept = []
    count = 0
    while count < n:
        cand = rng.random((2 * n, 2))
        cand = cand[in_lshape(cand, arm_width)]
        kept.append(cand)
        count += len(cand)
    x_train = np.concatenate(kept)[:n]
    # horizontal arm = 0, vertical arm = 1; the shared square goes to the nearer arm
    arm = (x_train[:, 1] > x_train[:, 0]).astype(np.int64)
    x_ood = rng.uniform(corner[0], corner[1], size=(n, 2))
    prov = {
        "generator": "lshape",
        "seed": int(seed),
        "n": int(n),
        "arm_width": float(arm_width),
        "corner": [float(c) for c in corner],
        "target_value": float(target_value),
    }
    train = LabeledDataset(
        x_train,
        labels=arm,
        targets=np.full(n, float(target_value)),
        ind_flag=np.ones(n, dtype=bool),
        provenance={**prov, "split": "train"},
    )
    ood = LabeledDataset(
        x_ood,
        targets=np.full(n, float(target_value)),
        ind_flag=np.zeros(n, dtype=bool),
        provenance={**prov, "split": "ood"},
    )
    return train, ood


# -- Friedman ----------------------------------------------------------------


def friedman_function(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (
        10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * x[:, 3]
        + 5.0 * x[:, 4]
    )


def gen_friedman(
    n: int, noise_sigma: float = 1.0, seed: int = 0, n_features: int = 5
) -> LabeledDataset:
    """Uniform inputs on [0, 1] with the Friedman #1 response plus Gaussian noise.

    Only the first five features enter the response; any further
    ``n_features - 5`` columns are irrelevant uniform noise.
    """
    if n < 1:
        raise ValueError("gen_friedman needs n >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    if n_features < 5:
        raise ValueError("gen_friedman needs n_features >= 5")
    rng = np.random.default_rng(seed)
    x = rng.random((n, n_features))
    y = friedman_function(x) + noise_sigma * rng.standard_normal(n)
    return LabeledDataset(
        x,
        targets=y,
        provenance={
            "generator": "friedman",
            "seed": int(seed),
            "n": int(n),
            "noise_sigma": float(noise_sigma),
            "n_features": int(n_features),
        },
    )


def friedman_ood_split(data: LabeledDataset, threshold: float) -> tuple[LabeledDataset, LabeledDataset]:
    """Rows with ``y < threshold`` are InD; rows with ``y >= threshold`` are OOD."""
    if data.targets is None:
        raise ValueError("friedman_ood_split requires targets")
    low = data.targets < threshold
    if low.all() or not low.any():
        raise ValueError(
            f"threshold {threshold} leaves one side empty; "
            f"try the target median {float(np.median(data.targets)):.4g}"
        )
    ind = data.subset(np.flatnonzero(low))
    ood = data.subset(np.flatnonzero(~low))
    ind.ind_flag = np.ones(len(ind), dtype=bool)
    ood.ind_flag = np.zeros(len(ood), dtype=bool)
    for part, side in ((ind, "ind"), (ood, "ood")):
        part.provenance = {**data.provenance, "threshold": float(threshold), "split": side}
    return ind, ood


def holdout_split(
    data: LabeledDataset, train_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Random (fit, held-out) row split; the fit part gets ``round(train_fraction * n)`` rows."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(data)
    k = int(round(train_fraction * n))
    if not 0 < k < n:
        raise ValueError(f"train_fraction {train_fraction} leaves an empty side for {n} rows")
    perm = np.random.default_rng(np.random.SeedSequence([int(seed), 1])).permutation(n)
    return data.subset(np.sort(perm[:k])), data.subset(np.sort(perm[k:]))


def friedman_benchmark(
    n: int = 5000,
    seed: int = 0,
    noise_sigma: float = 1.0,
    n_features: int = 5,
    threshold_quantile: float = 0.5,
    train_fraction: float = 0.8,
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """``(train, ind_test, ood)``: threshold the response at a quantile, hold out part of the InD side."""
    data = gen_friedman(n, noise_sigma, seed, n_features)
    ind, ood = friedman_ood_split(data, float(np.quantile(data.targets, threshold_quantile)))
    train, ind_test = holdout_split(ind, train_fraction, seed)
    return train, ind_test, ood


def synthetic_ood_scale(data: LabeledDataset, feature_index: int, factor: float) -> LabeledDataset:
    """Copy of ``data`` with one feature column multiplied by ``factor``, flagged OOD."""
    if not 0 <= feature_index < data.n_features:
        raise IndexError(f"feature_index {feature_index} out of range for {data.n_features} features")
    if not math.isfinite(factor):
        raise ValueError("scale factor must be finite")
    x = data.features.copy()
    x[:, feature_index] *= factor
    out = replace(data, features=x, ind_flag=np.zeros(len(data), dtype=bool))
    out.provenance = {
        **data.provenance,
        "synthetic_scale": {"feature_index": int(feature_index), "factor": float(factor)},
    }
    return out


# -- delimited text ----------------------------------------------------------


@dataclass(frozen=True)
class DelimitedSchema:
    """Column conventions for delimited files.

    ``label_column`` / ``target_column`` / ``flag_column`` name a column by
    header name (if ``header``) or by zero-based index; every other column is a
    feature.
    """

    delimiter: str = ","
    header: bool = True
    label_column: str | int | None = None
    target_column: str | int | None = None
    flag_column: str | int | None = None

    @classmethod
    def from_dict(cls, d: dict | None) -> DelimitedSchema:
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown schema keys: {sorted(unknown)}")
        if d.get("delimiter") in ("tab", "\\t"):
            d["delimiter"] = "\t"
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> DelimitedSchema:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _column_index(spec, names: list[str] | None, n_cols: int) -> int | None:
    if spec is None:
        return None
    if isinstance(spec, str):
        if names is None or spec not in names:
            raise ValueError(f"column {spec!r} not found in header {names}")
        return names.index(spec)
    if not 0 <= spec < n_cols:
        raise ValueError(f"column index {spec} out of range for {n_cols} columns")
    return int(spec)


def load_delimited(path, schema: DelimitedSchema | dict | None = None) -> LabeledDataset:
    """Parse a numeric delimited file. Row and column numbers in errors are 1-based data rows."""
    if not isinstance(schema, DelimitedSchema):
        schema = DelimitedSchema.from_dict(schema)
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=schema.delimiter) if r]
    names = None
    if schema.header:
        if not rows:
            raise ValueError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    n_cols = len(names) if names is not None else len(rows[0])
    values = np.empty((len(rows), n_cols))
    for r, row in enumerate(rows, start=1):
        if len(row) != n_cols:
            raise ValueError(f"{path}: row {r} has {len(row)} columns, expected {n_cols}")
        for c, cell in enumerate(row, start=1):
            try:
                values[r - 1, c - 1] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: row {r}, column {c}: non-numeric cell {cell!r}"
                ) from None
            if not math.isfinite(values[r - 1, c - 1]):
                raise ValueError(f"{path}: row {r}, column {c}: non-finite value {cell!r}")
    special = {
        key: _column_index(getattr(schema, f"{key}_column"), names, n_cols)
        for key in ("label", "target", "flag")
    }
    feature_cols = [c for c in range(n_cols) if c not in special.values()]
    if not feature_cols:
        raise ValueError(f"{path}: no feature columns")
    extra = {}
    for key, col in special.items():
        if col is not None:
            extra[key] = values[:, col]
    labels = extra.get("label")
    if labels is not None and not np.all(labels == np.round(labels)):
        raise ValueError(f"{path}: label column holds non-integer values")
    return LabeledDataset(
        values[:, feature_cols],
        labels=None if labels is None else labels.astype(np.int64),
        targets=extra.get("target"),
        ind_flag=None if "flag" not in extra else extra["flag"] != 0,
        provenance={"loader": "delimited", "path": str(path), "schema": schema.to_dict()},
    )


def save_delimited(data: LabeledDataset, path, schema: DelimitedSchema | dict | None = None) -> None:
    """Write ``data`` so that :func:`load_delimited` with the same schema reads it back exactly."""
    if not isinstance(schema, DelimitedSchema):
        schema = DelimitedSchema.from_dict(schema)
    names = [f"x{j}" for j in range(data.n_features)]
    cols = [data.features[:, j] for j in range(data.n_features)]
    for key, value in (("label", data.labels), ("target", data.targets), ("flag", data.ind_flag)):
        spec = getattr(schema, f"{key}_column")
        if spec is None:
            continue
        if value is None:
            raise ValueError(f"schema names a {key} column but the dataset has no {key}s")
        if not isinstance(spec, str):
            raise ValueError("save_delimited needs named columns in the schema")
        names.append(spec)
        cols.append(value.astype(np.int64) if key != "target" else value)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter)
        if schema.header:
            writer.writerow(names)
        for i in range(len(data)):
            writer.writerow([repr(float(c[i])) if c.dtype.kind == "f" else str(int(c[i])) for c in cols])
