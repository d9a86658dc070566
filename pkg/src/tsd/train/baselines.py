"""Persistence and seasonal-naive forecasts, the yardstick for trained models."""

from __future__ import annotations

import warnings

import numpy as np

from tsd.data.windows import ForecastData
from tsd.train.losses import error_metrics
from tsd.train.report import MetricReport

SEASONS = {"etth1": 24, "etth2": 24, "ettm1": 96, "ili": 52, "exchange": 7}


def persistence(inputs: np.ndarray, horizon: int, n_targets: int) -> np.ndarray:
    """Repeat the last observed value of each target channel."""
    last = inputs[:, :n_targets, -1:]
    return np.repeat(last, horizon, axis=-1)


def seasonal_naive(inputs: np.ndarray, horizon: int, n_targets: int, season: int) -> np.ndarray:
    """Tile the last full season; falls back to persistence when the lookback is shorter."""
    lookback = inputs.shape[-1]
    if season > lookback:
        warnings.warn(
            f"lookback {lookback} < season {season}; seasonal-naive falls back to persistence",
            RuntimeWarning,
            stacklevel=2,
        )
        return persistence(inputs, horizon, n_targets)
    cols = lookback - season + np.arange(horizon) % season
    return inputs[:, :n_targets, cols]


class NaivePredictor:
    """Wraps a baseline so it satisfies the ``predict(inputs)`` protocol."""

    def __init__(self, kind: str, horizon: int, n_targets: int, season: int | None = None):
        self.kind = kind
        self.horizon = horizon
        self.n_targets = n_targets
        self.season = season

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        if self.kind == "persistence":
            return persistence(inputs, self.horizon, self.n_targets)
        return seasonal_naive(inputs, self.horizon, self.n_targets, self.season)


def naive_baselines(data: ForecastData, partition: str = "test", season: int | None = None) -> dict[str, MetricReport]:
    """Reports for ``persistence`` and ``seasonal-naive`` on one partition."""
    season = season or SEASONS.get(data.kind, 24)
    windows = data.partition(partition)
    out = {}
    for kind in ("persistence", "seasonal-naive"):
        pred = NaivePredictor(kind, data.horizon, data.n_targets, season).predict(windows.inputs)
        m, a = error_metrics(pred, windows.targets)
        out[kind] = MetricReport(data.name, data.mode, data.horizon, m, a, 1, (0,), kind)
    return out
