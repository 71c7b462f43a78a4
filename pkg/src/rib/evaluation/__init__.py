from .gap import GapReport, GapRow, gap_report
from .info import FcmiEstimate, fcmi_bound, per_index_mi, plugin_mi
from .recog import CriticFitConfig, RecognizabilityReport, estimate_recognizability, report_from_scores
from .roc import (
    RocCurve,
    achievable_region,
    auc_roc,
    convex_hull_curve,
    polygon_area,
    recognizability,
    roc_curve,
)
from .theory import (
    LOG_E_OVER_2,
    gaussian_recognizability,
    gaussian_roc,
    lemma1_numeric,
    roc_conditions_check,
    theorem1_gaussian_check,
)

__all__ = [
    "CriticFitConfig",
    "FcmiEstimate",
    "GapReport",
    "GapRow",
    "LOG_E_OVER_2",
    "RecognizabilityReport",
    "RocCurve",
    "achievable_region",
    "auc_roc",
    "convex_hull_curve",
    "estimate_recognizability",
    "fcmi_bound",
    "gap_report",
    "gaussian_recognizability",
    "gaussian_roc",
    "lemma1_numeric",
    "per_index_mi",
    "plugin_mi",
    "polygon_area",
    "recognizability",
    "report_from_scores",
    "roc_conditions_check",
    "roc_curve",
    "theorem1_gaussian_check",
]
