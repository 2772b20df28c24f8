"""Metric depth from relative depth and sparse metric seeds."""

from .config import PipelineConfig
from .errors import EmptyMaskError, FormatError, InputError, MTDError, NumericalError, ParseError
from .grid import RgbImage, ScalarGrid, SeedSet, second_differences
from .metrics import MetricReport, evaluate
from .pipeline import PipelineResult, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "MetricReport",
    "RgbImage",
    "ScalarGrid",
    "SeedSet",
    "second_differences",
    "evaluate",
    "run_pipeline",
    "EmptyMaskError",
    "FormatError",
    "InputError",
    "MTDError",
    "NumericalError",
    "ParseError",
]
