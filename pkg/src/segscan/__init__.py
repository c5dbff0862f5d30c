"""Multiscale change-point segmentation of one or many aligned sequences."""
from .allele import AlleleModelParams, AlleleStat, allele_v_stat, estimate_variances
from .calibrate import calibrate_null, calibrate_permutation
from .estimators import AlleleSpecificSegmentation, LocalSegmentation, ReverseSegmentation
from .grid import WindowGrid, WindowPair, build_grid
from .panel import PrefixSums, SequencePanel, build_panel, standardize
from .segment import SegmentationResult, local_segment, refine, reverse_segment
from .simlab import detection_boundary, make_example1, make_sparse_panel, run_benchmark
from .stats import (
    ScoreParams,
    b_plus,
    bj_stat,
    hc_stat,
    local_stat,
    make_stat,
    normal_sf,
    panel_stat,
    score_stat,
    z_stat,
)
from .thresholds import ThresholdPolicy

__version__ = "0.1.0"

__all__ = [
    "AlleleModelParams",
    "AlleleSpecificSegmentation",
    "AlleleStat",
    "LocalSegmentation",
    "PrefixSums",
    "ReverseSegmentation",
    "ScoreParams",
    "SegmentationResult",
    "SequencePanel",
    "ThresholdPolicy",
    "WindowGrid",
    "WindowPair",
    "allele_v_stat",
    "b_plus",
    "bj_stat",
    "build_grid",
    "build_panel",
    "calibrate_null",
    "calibrate_permutation",
    "detection_boundary",
    "estimate_variances",
    "hc_stat",
    "local_segment",
    "local_stat",
    "make_example1",
    "make_sparse_panel",
    "make_stat",
    "normal_sf",
    "panel_stat",
    "refine",
    "reverse_segment",
    "run_benchmark",
    "score_stat",
    "standardize",
    "z_stat",
]
