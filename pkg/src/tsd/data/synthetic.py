"""Deterministic synthetic series used as fixtures and in the CLI smoke paths."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from tsd.data.frame import TimeSeriesFrame
from tsd.data.windows import ForecastData


def sine_frame(n_rows: int = 400, n_channels: int = 2, period: int = 24, noise: float = 0.0, seed: int = 0) -> TimeSeriesFrame:
    """Hourly sines with per-channel phase; the last channel is named ``OT``."""
    t = np.arange(n_rows, dtype=np.float64)
    phases = np.linspace(0.0, np.pi, n_channels, endpoint=False)
    values = np.sin(2 * np.pi * t[:, None] / period + phases[None, :])
    if noise:
        values = values + noise * np.random.default_rng(seed).normal(size=values.shape)
    stamps = np.datetime64("2016-07-01T00:00:00", "ns") + np.arange(n_rows) * np.timedelta64(1, "h")
    names = tuple(f"x{i}" for i in range(n_channels - 1)) + ("OT",)
    return TimeSeriesFrame(stamps, values, names, n_channels - 1)


def sine_windows(n_windows: int = 32, lookback: int = 48, horizon: int = 24, period: int = 24) -> ForecastData:
    """One-channel sine windows with distinct phases, shared by all partitions."""
    offsets = np.arange(n_windows) * 3
    t = offsets[:, None] + np.arange(lookback + horizon)[None, :]
    series = np.sin(2 * np.pi * t / period)
    inputs = series[:, None, :lookback]
    targets = series[:, None, lookback:]
    return ForecastData.from_arrays((inputs, targets), name="sine", mode="univariate")


def write_csv(frame: TimeSeriesFrame, path) -> Path:
    """Write ``frame`` in the benchmark CSV layout (``date`` first, ``%Y-%m-%d %H:%M:%S``)."""
    stamps = np.datetime_as_string(frame.timestamps, unit="s")
    lines = ["date," + ",".join(frame.channel_names)]
    for stamp, row in zip(stamps, frame.values):
        lines.append(stamp.replace("T", " ") + "," + ",".join(repr(float(v)) for v in row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
