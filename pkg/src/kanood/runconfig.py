"""YAML run configuration for the command-line harness and the dataset recipes it names."""

from __future__ import annotations

import itertools
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .datasets import (
    DelimitedSchema,
    LabeledDataset,
    friedman_benchmark,
    gen_five_peaks,
    gen_lshape,
    holdout_split,
    load_delimited,
    synthetic_ood_scale,
)
from .detector import DetectorConfig

OUTPUT_DIR_ENV = "KANOOD_OUTPUT_DIR"
DATASET_KINDS = ("five_peaks", "lshape", "friedman", "delimited")
SWEEP_KEYS = ("partitions", "grid_size")


def _reject_unknown(section: str, d: dict, allowed) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ValueError(f"unknown {section} keys: {sorted(unknown)}")


@dataclass
class OodSet:
    name: str
    features: np.ndarray
    group: str | None = None


@dataclass
class BenchmarkData:
    """Everything one evaluation run needs: a fit set, InD test rows, OOD sets."""

    train: LabeledDataset
    ind_test: np.ndarray
    ood_sets: list[OodSet]
    # several OOD sets whose metrics are averaged into one row (synthetic scaling)
    pooled: dict[str, list[OodSet]] = field(default_factory=dict)


@dataclass
class DatasetSpec:
    kind: str = "five_peaks"
    n: int = 2000
    params: dict = field(default_factory=dict)
    train_fraction: float = 0.8
    # delimited inputs
    schema: dict | None = None
    train: str | None = None
    ind_test: str | None = None
    ood: list[dict] = field(default_factory=list)
    # optional synthetic OOD: scale one random feature of the InD test rows
    synthetic_scale: dict | None = None

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ValueError(f"dataset.kind must be one of {DATASET_KINDS}, got {self.kind!r}")
        if not isinstance(self.n, int) or self.n < 10:
            raise ValueError(f"dataset.n must be an integer >= 10, got {self.n!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"dataset.train_fraction must lie in (0, 1), got {self.train_fraction!r}")
        if self.kind == "delimited":
            if not self.train or not self.ood:
                raise ValueError("dataset.kind=delimited needs 'train' and at least one 'ood' entry")
            for entry in self.ood:
                _reject_unknown("dataset.ood entry", entry, ("name", "path", "group"))
                if "path" not in entry:
                    raise ValueError("every dataset.ood entry needs a 'path'")
        if self.synthetic_scale is not None:
            _reject_unknown("dataset.synthetic_scale", self.synthetic_scale, ("factor", "repeats", "group"))
            if "factor" not in self.synthetic_scale:
                raise ValueError("dataset.synthetic_scale needs a 'factor'")

    def build(self, seed: int, base_dir: Path | None = None) -> BenchmarkData:
        """Materialize the recipe for one data seed."""
        base_dir = base_dir or Path(".")
        if self.kind == "five_peaks":
            train, test = gen_five_peaks(self.n, seed, **self.params)
            data = BenchmarkData(
                train,
                test.features[test.ind_flag],
                [OodSet("held_out_peaks", test.features[~test.ind_flag])],
            )
        elif self.kind == "lshape":
            full, corner = gen_lshape(self.n, seed, **self.params)
            train, held = holdout_split(full, self.train_fraction, seed)
            data = BenchmarkData(train, held.features, [OodSet("corner", corner.features)])
        elif self.kind == "friedman":
            train, held, ood = friedman_benchmark(
                self.n, seed, train_fraction=self.train_fraction, **self.params
            )
            data = BenchmarkData(train, held.features, [OodSet("high_response", ood.features)])
        else:
            data = self._build_delimited(seed, base_dir)
        if self.synthetic_scale is not None:
            self._add_scaled(data, seed)
        return data

    def _build_delimited(self, seed: int, base_dir: Path) -> BenchmarkData:
        schema = DelimitedSchema.from_dict(self.schema)
        train = load_delimited(base_dir / self.train, schema)
        if self.ind_test:
            held = load_delimited(base_dir / self.ind_test, schema).features
        else:
            train, rest = holdout_split(train, self.train_fraction, seed)
            held = rest.features
        ood = []
        for entry in self.ood:
            path = base_dir / entry["path"]
            ood.append(OodSet(entry.get("name", Path(entry["path"]).stem), load_delimited(path, schema).features, entry.get("group")))
        return BenchmarkData(train, held, ood)

    def _add_scaled(self, data: BenchmarkData, seed: int) -> None:
        factor = float(self.synthetic_scale["factor"])
        repeats = int(self.synthetic_scale.get("repeats", 100))
        group = self.synthetic_scale.get("group")
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
        base = LabeledDataset(data.ind_test)
        picks = rng.integers(0, base.n_features, size=repeats)
        name = f"scaled_x{factor:g}"
        data.pooled[name] = [
            OodSet(name, synthetic_ood_scale(base, int(j), factor).features, group) for j in picks
        ]


@dataclass
class BaselineSpec:
    histogram: bool = False
    histogram_grid_size: int | None = None  # defaults to the detector's grid size
    histogram_scoring: str | None = None  # defaults to the detector's scoring
    knn: bool = False
    knn_k: int | None = None
    knn_feature_map: str = "none"


@dataclass
class OutputSpec:
    dir: str = "kanood-runs"
    bundle: str = "detector.json"
    report: str = "report.json"
    csv: str = "report.csv"

    def resolve_dir(self, override: str | None = None) -> Path:
        """``override`` (a CLI flag) beats the environment variable, which beats the file."""
        return Path(override or os.environ.get(OUTPUT_DIR_ENV) or self.dir)


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    seeds: list[int] = field(default_factory=lambda: [0])
    data_seeds: list[int] | None = None
    sweep: dict[str, list] = field(default_factory=dict)
    baselines: BaselineSpec = field(default_factory=BaselineSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def __post_init__(self):
        if not self.seeds or not all(isinstance(s, int) for s in self.seeds):
            raise ValueError(f"seeds must be a non-empty list of integers, got {self.seeds!r}")
        if self.data_seeds is not None and not all(isinstance(s, int) for s in self.data_seeds):
            raise ValueError(f"data_seeds must be a list of integers, got {self.data_seeds!r}")
        _reject_unknown("sweep", self.sweep, SWEEP_KEYS)
        for key, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                raise ValueError(f"sweep.{key} must be a non-empty list")
            for v in values:  # each combination must be a valid detector
                DetectorConfig.from_dict({**self.detector.to_dict(), key: v})

    @property
    def resolved_data_seeds(self) -> list[int]:
        return list(self.data_seeds) if self.data_seeds is not None else [0]

    def combinations(self) -> list[tuple[dict, DetectorConfig]]:
        """(sweep point, detector config) for every point of the sweep grid."""
        keys = [k for k in SWEEP_KEYS if k in self.sweep]
        out = []
        for values in itertools.product(*(self.sweep[k] for k in keys)):
            point = dict(zip(keys, values))
            out.append((point, DetectorConfig.from_dict({**self.detector.to_dict(), **point})))
        return out

    @classmethod
    def from_dict(cls, d: dict | None, base_dir: Path | None = None) -> RunConfig:
        d = dict(d or {})
        _reject_unknown("run config", d, [f.name for f in fields(cls) if f.name != "base_dir"])
        kwargs = {}
        for name, sub in (("dataset", DatasetSpec), ("baselines", BaselineSpec), ("output", OutputSpec)):
            if name in d:
                section = d.pop(name) or {}
                _reject_unknown(name, section, [f.name for f in fields(sub)])
                kwargs[name] = sub(**section)
        if "detector" in d:
            kwargs["detector"] = DetectorConfig.from_dict(d.pop("detector") or {})
        return cls(**kwargs, **d, base_dir=base_dir or Path("."))

    @classmethod
    def from_file(cls, path) -> RunConfig:
        path = Path(path)
        with open(path) as fh:
            d = yaml.safe_load(fh)
        if d is not None and not isinstance(d, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "dataset": asdict(self.dataset),
            "detector": self.detector.to_dict(),
            "seeds": list(self.seeds),
            "data_seeds": None if self.data_seeds is None else list(self.data_seeds),
            "sweep": {k: list(v) for k, v in self.sweep.items()},
            "baselines": asdict(self.baselines),
            "output": asdict(self.output),
        }
