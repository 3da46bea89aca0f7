"""Residual-based change-point test for the innovation distribution of
nonparametric (conditionally heteroscedastic) autoregressions."""

from .errors import (
    CharnError,
    DegenerateVarianceError,
    EmptyNeighborhoodError,
    NumericOverflowError,
    ParameterError,
)
from .kernel import BandwidthRule, FitResult, Kernel, Mode, fit, nw_mean, nw_variance
from .model import PRESETS, DgpSpec, Family, InnovationSpec, Series, generate, sample_innovation
from .nulldist import NullTable, build_table, load_or_build, p_value, simulate_sheet_sup
from .seqtest import TestReport, WeightSpec, run_test, seq_ecdf, test_process, weight

__version__ = "0.1.0"

__all__ = [
    "BandwidthRule",
    "CharnError",
    "DegenerateVarianceError",
    "DgpSpec",
    "EmptyNeighborhoodError",
    "Family",
    "FitResult",
    "InnovationSpec",
    "Kernel",
    "Mode",
    "NullTable",
    "NumericOverflowError",
    "PRESETS",
    "ParameterError",
    "Series",
    "TestReport",
    "WeightSpec",
    "build_table",
    "fit",
    "generate",
    "load_or_build",
    "nw_mean",
    "nw_variance",
    "p_value",
    "run_test",
    "sample_innovation",
    "seq_ecdf",
    "simulate_sheet_sup",
    "test_process",
    "weight",
]
