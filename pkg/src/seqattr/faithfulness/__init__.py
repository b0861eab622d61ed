"""Faithfulness evaluation: perturbation metrics and cross-method comparison."""

from .compare import WinMatrix, paired_sign_test, win_matrix
from .metrics import (
    K_GRID,
    FaithfulnessResult,
    faithfulness_scores,
    top_fraction_count,
)
from .report import (
    EXTRAPOLATION_POPULATIONS,
    FaithfulnessReport,
    build_report,
    extrapolate_hours,
    seconds_per_record,
)

__all__ = [
    "EXTRAPOLATION_POPULATIONS",
    "K_GRID",
    "FaithfulnessReport",
    "FaithfulnessResult",
    "WinMatrix",
    "build_report",
    "extrapolate_hours",
    "faithfulness_scores",
    "paired_sign_test",
    "seconds_per_record",
    "top_fraction_count",
    "win_matrix",
]
