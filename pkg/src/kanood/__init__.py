"""Out-of-distribution detection with Kolmogorov-Arnold networks.

A KAN trained on in-distribution data is compared against an identically
initialized untrained copy; spline regions that training never touched
respond identically in both, which flags inputs that land there as OOD.
"""

from .baselines import HistogramDetector, KnnDetector, histogram_fit, histogram_score, knn_fit, knn_score
from .datasets import (
    DelimitedSchema,
    LabeledDataset,
    friedman_benchmark,
    friedman_ood_split,
    gen_five_peaks,
    gen_friedman,
    gen_lshape,
    holdout_split,
    load_delimited,
    save_delimited,
    synthetic_ood_scale,
)
from .detector import (
    DetectorConfig,
    KanDetector,
    PartitionedDetector,
    classify,
    delta_matrix,
    fit_detector,
    ind_score,
    load_bundle,
    partitioned_score,
    save_bundle,
)
from .metrics import EvalReport, auroc, fpr_at_95, overall_average, seed_sweep_stats, welch_t_test
from .network import KanLayer, KanNetwork, TrainConfig, clone_weights, init_network, train
from .partitioning import ClusterModel, assign, class_partition, kmeans_fit
from .preprocessing import HistogramNormalizer, fit_normalizer
from .spline import SplineGrid, basis_eval, basis_grad

__version__ = "0.1.0"

__all__ = [
    "ClusterModel",
    "DelimitedSchema",
    "DetectorConfig",
    "EvalReport",
    "HistogramDetector",
    "HistogramNormalizer",
    "KanDetector",
    "KanLayer",
    "KanNetwork",
    "KnnDetector",
    "LabeledDataset",
    "PartitionedDetector",
    "SplineGrid",
    "TrainConfig",
    "assign",
    "auroc",
    "basis_eval",
    "basis_grad",
    "class_partition",
    "classify",
    "clone_weights",
    "delta_matrix",
    "fit_detector",
    "fit_normalizer",
    "fpr_at_95",
    "friedman_benchmark",
    "friedman_ood_split",
    "gen_five_peaks",
    "gen_friedman",
    "gen_lshape",
    "histogram_fit",
    "holdout_split",
    "histogram_score",
    "ind_score",
    "init_network",
    "kmeans_fit",
    "knn_fit",
    "knn_score",
    "load_bundle",
    "load_delimited",
    "overall_average",
    "partitioned_score",
    "save_bundle",
    "save_delimited",
    "seed_sweep_stats",
    "synthetic_ood_scale",
    "train",
    "welch_t_test",
]
