"""Trained-vs-untrained KAN out-of-distribution detector."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _archive
from .datasets import LabeledDataset
from .network import (
    KanNetwork,
    TrainConfig,
    clone_weights,
    init_network,
    network_from_dict,
    network_to_dict,
    train,
)
from .partitioning import ClusterModel, class_partition_indices, cluster_partition
from .preprocessing import HistogramNormalizer, fit_normalizer

logger = logging.getLogger(__name__)

REDUCERS = {
    "min": np.min,
    "mean": np.mean,
    "median": np.median,
    "max": np.max,
}
PARTITIONERS = ("kmeans", "class_based")
BUNDLE_FORMAT = "kanood-detector"
BUNDLE_VERSION = 1
KMEANS_STREAM = 2**31 - 1


def reduce(values, fn: str, axis=-1) -> np.ndarray:
    """Apply a named reduction (min, mean, median, max) along ``axis``."""
    try:
        return REDUCERS[fn](values, axis=axis)
    except KeyError:
        raise ValueError(f"unknown reduction {fn!r}; choose from {sorted(REDUCERS)}") from None


@dataclass
class KanDetector:
    trained: KanNetwork
    untrained: KanNetwork
    scoring: str = "median"
    include_residual: bool = False

    def __post_init__(self):
        if self.trained.shape != self.untrained.shape or self.trained.grid != self.untrained.grid:
            raise ValueError("trained and untrained networks must share shape and grid")
        reduce(np.zeros(1), self.scoring)

    def activations(self, net: KanNetwork, x) -> list[np.ndarray]:
        _, rec = net.forward(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        if self.include_residual:
            return [s + r for s, r in zip(rec.spline, rec.residual)]
        return rec.spline

    def delta_matrix(self, x, untrained_acts=None) -> list[np.ndarray]:
        """Per-layer ``|phi_trained - phi_untrained|``, each shaped (batch, n_in, n_out)."""
        if untrained_acts is None:
            untrained_acts = self.activations(self.untrained, x)
        trained_acts = self.activations(self.trained, x)
        return [np.abs(a - b) for a, b in zip(trained_acts, untrained_acts)]

    def score(self, x, untrained_acts=None) -> np.ndarray:
        """InD score per row: the scoring function over all Delta entries of all layers."""
        deltas = self.delta_matrix(x, untrained_acts)
        flat = np.concatenate([d.reshape(len(d), -1) for d in deltas], axis=1)
        return reduce(flat, self.scoring, axis=1)


@dataclass
class DetectorConfig:
    """Detector hyperparameters; field names follow the usual tuning table."""

    grid_size: int = 100
    spline_order: int = 3
    partitions: int = 1
    partitioning_method: str = "kmeans"
    scoring: str = "median"
    aggregation: str = "max"
    histogram_norm: bool = True
    histogram_bins: int = 10
    domain: tuple[float, float] = (-1.0, 1.0)
    hidden: list[int] = field(default_factory=list)
    init_std: float = 0.1
    shared_untrained: bool = True
    include_residual: bool = False
    threshold: float | None = None
    learning_rate: float = 0.1
    epochs: int = 1
    batch_size: int | None = None
    weight_decay: float = 1e-4
    task: str = "regression"
    constant_value: float = 1.0

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        self.hidden = [int(h) for h in self.hidden]
        checks = [
            (isinstance(self.grid_size, int) and self.grid_size >= 1, "grid_size", "a positive integer"),
            (isinstance(self.spline_order, int) and self.spline_order >= 0, "spline_order", "a non-negative integer"),
            (isinstance(self.partitions, int) and self.partitions >= 1, "partitions", "a positive integer"),
            (self.partitioning_method in PARTITIONERS, "partitioning_method", f"one of {PARTITIONERS}"),
            (self.scoring in REDUCERS, "scoring", f"one of {sorted(REDUCERS)}"),
            (self.aggregation in REDUCERS, "aggregation", f"one of {sorted(REDUCERS)}"),
            (isinstance(self.histogram_bins, int) and self.histogram_bins >= 1, "histogram_bins", "a positive integer"),
            (len(self.domain) == 2 and self.domain[0] < self.domain[1], "domain", "an increasing pair"),
            (all(h >= 1 for h in self.hidden), "hidden", "a list of positive widths"),
            (self.init_std > 0, "init_std", "positive"),
            (self.threshold is None or np.isfinite(self.threshold), "threshold", "finite"),
        ]
        for ok, name, what in checks:
            if not ok:
                raise ValueError(f"{name} must be {what}, got {getattr(self, name)!r}")
        self.train_config(0)  # validates the training fields

    def train_config(self, rng_seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            weight_decay=self.weight_decay,
            task=self.task,
            constant_value=self.constant_value,
            rng_seed=rng_seed,
        )

    @classmethod
    def from_dict(cls, d: dict) -> DetectorConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown detector keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domain"] = list(self.domain)
        return d


@dataclass
class PartitionedDetector:
    """One KAN detector per training partition, scores aggregated across members."""

    detectors: list[KanDetector]
    aggregation: str = "max"
    shared_untrained: bool = True
    normalizer: HistogramNormalizer | None = None
    cluster_model: ClusterModel | None = None
    classes: np.ndarray | None = None
    config: DetectorConfig | None = None
    partition_sizes: list[int] = field(default_factory=list)
    train_losses: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.detectors:
            raise ValueError("a partitioned detector needs at least one member")
        first = self.detectors[0]
        for det in self.detectors[1:]:
            if det.trained.grid != first.trained.grid or det.scoring != first.scoring:
                raise ValueError("member detectors must share grid spec and scoring")
        reduce(np.zeros(1), self.aggregation)

    @property
    def partition_count(self) -> int:
        return len(self.detectors)

    @property
    def n_features(self) -> int:
        return self.detectors[0].trained.shape[0]

    def prepare(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} input features, got {x.shape[1]}")
        return x if self.normalizer is None else self.normalizer.transform(x)

    def member_scores(self, x, batch: int = 2048) -> np.ndarray:
        """Scores of every member, shaped (n, P). ``x`` is in raw feature space."""
        x = self.prepare(x)
        out = np.empty((len(x), self.partition_count))
        for start in range(0, len(x), batch):
            xb = x[start : start + batch]
            shared = None
            if self.shared_untrained:
                shared = self.detectors[0].activations(self.detectors[0].untrained, xb)
            for j, det in enumerate(self.detectors):
                out[start : start + batch, j] = det.score(xb, shared)
        return out

    def score(self, x) -> np.ndarray:
        return reduce(self.member_scores(x), self.aggregation, axis=1)


def delta_matrix(det: KanDetector, x) -> list[np.ndarray]:
    """Delta matrices for a single vector ``x`` (one (n_in, n_out) array per layer)."""
    x = np.asarray(x, dtype=np.float64)
    deltas = det.delta_matrix(x)
    return [d[0] for d in deltas] if x.ndim == 1 else deltas


def _scalar_or_array(x, values):
    return float(values[0]) if np.asarray(x).ndim == 1 else values


def ind_score(det: KanDetector, x):
    return _scalar_or_array(x, det.score(x))


def partitioned_score(pdet: PartitionedDetector, x):
    return _scalar_or_array(x, pdet.score(x))


def classify(det, x, threshold: float):
    """``True`` (InD) where the score reaches ``threshold``, ``False`` (OOD) below it."""
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    s = det.score(x)
    verdict = s >= threshold
    return bool(verdict[0]) if np.asarray(x).ndim == 1 else verdict


def quantile_threshold(pdet, train_features, quantile: float = 0.05) -> float:
    """Threshold at the given quantile of the training scores (lower quantile = looser)."""
    if not 0.0 <= quantile <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    return float(np.quantile(pdet.score(train_features), quantile))


def _member_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def _output_width(data: LabeledDataset, cfg: DetectorConfig) -> int:
    if cfg.task == "classification":
        if data.labels is None:
            raise ValueError("classification training requires labels")
        return int(np.max(data.labels)) + 1
    return 1


def fit_detector(data: LabeledDataset, cfg: DetectorConfig, seed: int = 0) -> PartitionedDetector:
    """Normalize, partition, and train one KAN copy per partition."""
    if len(data) == 0:
        raise ValueError("cannot fit a detector on an empty dataset")
    x = data.features
    normalizer = None
    if cfg.histogram_norm:
        normalizer = fit_normalizer(x, cfg.histogram_bins, cfg.domain)
        x = normalizer.transform(x)
    cluster_model = None
    classes = None
    if cfg.partitioning_method == "class_based":
        parts, classes = class_partition_indices(data.labels)
    elif cfg.partitions > len(x):
        raise ValueError(f"partitions={cfg.partitions} exceeds the {len(x)} training samples")
    else:
        km_seed = int(_member_seed(seed, KMEANS_STREAM).generate_state(1)[0])
        parts, cluster_model = cluster_partition(x, cfg.partitions, km_seed)
    for j, idx in enumerate(parts):
        if len(idx) < 1:
            raise ValueError(f"partition {j} is empty")

    shape = [data.n_features, *cfg.hidden, _output_width(data, cfg)]

    def make_untrained(index: int) -> KanNetwork:
        s = int(seed) if cfg.shared_untrained else int(_member_seed(seed, index).generate_state(1)[0])
        return init_network(shape, cfg.grid_size, cfg.spline_order, cfg.domain, s, cfg.init_std)

    shared = make_untrained(0) if cfg.shared_untrained else None
    detectors, losses = [], []
    for j, idx in enumerate(parts):
        untrained = shared if shared is not None else make_untrained(j)
        part = data.subset(idx)
        part.features = x[idx]
        history: list[float] = []
        rng_seed = int(_member_seed(seed, j).generate_state(1)[0])
        trained = train(untrained, part, cfg.train_config(rng_seed), history)
        detectors.append(KanDetector(trained, untrained, cfg.scoring, cfg.include_residual))
        losses.append(history)
        logger.info("partition %d: %d samples, final loss %.4g", j, len(idx), history[-1])
    return PartitionedDetector(
        detectors,
        aggregation=cfg.aggregation,
        shared_untrained=cfg.shared_untrained,
        normalizer=normalizer,
        cluster_model=cluster_model,
        classes=classes,
        config=cfg,
        partition_sizes=[int(len(i)) for i in parts],
        train_losses=losses,
    )


# -- bundle serialization ----------------------------------------------------


def bundle_to_dict(pdet: PartitionedDetector) -> dict:
    enc = _archive.encode_array
    cm = pdet.cluster_model
    return {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "config": None if pdet.config is None else pdet.config.to_dict(),
        "aggregation": pdet.aggregation,
        "scoring": pdet.detectors[0].scoring,
        "include_residual": pdet.detectors[0].include_residual,
        "shared_untrained": pdet.shared_untrained,
        "partition_sizes": pdet.partition_sizes,
        "normalizer": None if pdet.normalizer is None else pdet.normalizer.to_dict(enc),
        "partitioner": {
            "cluster_model": None
            if cm is None
            else {
                "centroids": enc(cm.centroids),
                "inertia": cm.inertia,
                "iterations_run": cm.iterations_run,
            },
            "classes": None if pdet.classes is None else [int(c) for c in pdet.classes],
        },
        "untrained": [network_to_dict(d.untrained, enc) for d in pdet.detectors[: 1 if pdet.shared_untrained else None]],
        "trained": [network_to_dict(d.trained, enc) for d in pdet.detectors],
    }


def bundle_from_dict(d: dict) -> PartitionedDetector:
    if d.get("format") != BUNDLE_FORMAT:
        raise ValueError("not a detector bundle")
    if d.get("version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {d.get('version')}")
    dec = _archive.decode_array
    untrained = [network_from_dict(n, dec) for n in d["untrained"]]
    trained = [network_from_dict(n, dec) for n in d["trained"]]
    if d["shared_untrained"]:
        untrained = untrained * len(trained)
    detectors = [
        KanDetector(t, u, d["scoring"], d["include_residual"]) for t, u in zip(trained, untrained)
    ]
    cm = d["partitioner"]["cluster_model"]
    classes = d["partitioner"]["classes"]
    return PartitionedDetector(
        detectors,
        aggregation=d["aggregation"],
        shared_untrained=d["shared_untrained"],
        normalizer=None
        if d["normalizer"] is None
        else HistogramNormalizer.from_dict(d["normalizer"], dec),
        cluster_model=None
        if cm is None
        else ClusterModel(dec(cm["centroids"]), cm["inertia"], cm["iterations_run"]),
        classes=None if classes is None else np.array(classes),
        config=None if d["config"] is None else DetectorConfig.from_dict(d["config"]),
        partition_sizes=list(d["partition_sizes"]),
    )


def save_bundle(pdet: PartitionedDetector, path) -> None:
    _archive.atomic_write_text(path, _archive.dumps(bundle_to_dict(pdet)))


def load_bundle(path) -> PartitionedDetector:
    with open(path, encoding="utf-8") as fh:
        return bundle_from_dict(json.load(fh))


def clone_detector(det: KanDetector) -> KanDetector:
    return KanDetector(clone_weights(det.trained), clone_weights(det.untrained), det.scoring, det.include_residual)
