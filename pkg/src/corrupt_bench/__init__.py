"""Deterministic image-corruption benchmark generation and robustness metrics."""

from .corruptions import (
    ALL_KINDS,
    CORE_KINDS,
    EXTRA_KINDS,
    SEVERITIES,
    CorruptionKind,
    SeverityTable,
    apply_corruption,
    load_table,
)
from .image_core import Kernel2D, Rng64, as_image, load_image, save_image
from .metrics import (
    ALEXNET,
    BaselineTable,
    ErrorProfile,
    RobustnessReport,
    build_error_profile,
    build_report,
    corruption_error,
    mean_ce,
    relative_ce,
    relative_mce,
)
from .pipeline import (
    DatasetManifest,
    PredictionRecord,
    average_distributions,
    derive_seed,
    generate_dataset,
    ten_crop,
)

__version__ = "0.1.0"

__all__ = [
    "ALEXNET", "ALL_KINDS", "CORE_KINDS", "EXTRA_KINDS", "SEVERITIES",
    "BaselineTable", "CorruptionKind", "DatasetManifest", "ErrorProfile", "Kernel2D",
    "PredictionRecord", "RobustnessReport", "Rng64", "SeverityTable",
    "apply_corruption", "as_image", "average_distributions", "build_error_profile",
    "build_report", "corruption_error", "derive_seed", "generate_dataset", "load_image",
    "load_table", "mean_ce", "relative_ce", "relative_mce", "save_image", "ten_crop",
]
