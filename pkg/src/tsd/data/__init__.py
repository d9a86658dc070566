"""Benchmark ingestion, 7:1:2 split, standardization and windowing."""

from tsd.data.frame import TimeSeriesFrame
from tsd.data.io import DISPLAY_NAMES, KINDS, GapWarning, file_sha256, load_csv, load_frame
from tsd.data.split import (
    MODES,
    PARTITIONS,
    SplitSpec,
    Standardizer,
    admissible_origins,
    split,
    split_boundaries,
)
from tsd.data.windows import ForecastData, WindowSample, WindowSet, make_windows, prepare, window_count

__all__ = [
    "DISPLAY_NAMES",
    "KINDS",
    "MODES",
    "PARTITIONS",
    "ForecastData",
    "GapWarning",
    "SplitSpec",
    "Standardizer",
    "TimeSeriesFrame",
    "WindowSample",
    "WindowSet",
    "admissible_origins",
    "file_sha256",
    "load_csv",
    "load_frame",
    "make_windows",
    "prepare",
    "split",
    "split_boundaries",
    "window_count",
]
