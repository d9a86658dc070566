"""Deterministic Cartesian hyperparameter search."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any

from tsd.data.windows import ForecastData
from tsd.errors import ConfigurationError
from tsd.model.config import TSDConfig, parameter_count, stable_hash
from tsd.train.loop import TrainSettings, train
from tsd.train.report import MetricReport

# documented search sets; anything else must sit on an axis marked extended
SEARCH_GRID: dict[str, tuple] = {
    "d_model": (512, 1024, 1280, 1536),
    "n_heads": (8, 16, 32),
    "n_blocks": (3, 4, 5),
    "dropout": (0.05, 0.1, 0.2, 0.3),
    "learning_rate": (1e-5, 2e-5, 1e-6, 5e-6, 1e-7),
    "scheduler_gamma": (0.97, 0.95, 0.87, 0.85),
    "scheduler_step": (2, 5, 8),
    "epochs": (15, 20, 25, 30, 35),
}

CONFIG_KEYS = frozenset(f.name for f in fields(TSDConfig))
SETTINGS_KEYS = frozenset(f.name for f in fields(TrainSettings))


@dataclass(frozen=True)
class GridSpec:
    """Named candidate lists, enumerated in insertion order, capped at ``budget`` trials."""

    axes: dict[str, tuple]
    budget: int
    extended: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "axes", {k: tuple(v) for k, v in self.axes.items()})
        object.__setattr__(self, "extended", frozenset(self.extended))
        if not isinstance(self.budget, int) or self.budget < 1:
            raise ConfigurationError(f"budget must be a positive integer, got {self.budget!r}")
        if not self.axes or any(len(v) == 0 for v in self.axes.values()):
            raise ConfigurationError("grid is empty")
        for name, values in self.axes.items():
            if name not in CONFIG_KEYS | SETTINGS_KEYS:
                raise ConfigurationError(f"grid axis {name!r} is neither a TSDConfig nor a TrainSettings field")
            if name in self.extended:
                continue
            allowed = SEARCH_GRID.get(name)
            if allowed is None:
                raise ConfigurationError(f"axis {name!r} has no documented search set; mark it extended")
            outside = [v for v in values if v not in allowed]
            if outside:
                raise ConfigurationError(f"axis {name!r} values {outside} are outside {allowed}; mark it extended")

    @property
    def size(self) -> int:
        n = 1
        for values in self.axes.values():
            n *= len(values)
        return n

    def points(self) -> list[dict[str, Any]]:
        names = list(self.axes)
        combos = itertools.islice(itertools.product(*self.axes.values()), self.budget)
        return [dict(zip(names, combo)) for combo in combos]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GridSpec":
        unknown = sorted(set(data) - {"axes", "budget", "extended"})
        if unknown:
            raise ConfigurationError(f"unknown grid key(s): {', '.join(unknown)}")
        if "axes" not in data:
            raise ConfigurationError("grid file needs an 'axes' object")
        return cls(data["axes"], data.get("budget", 1), frozenset(data.get("extended", ())))


@dataclass(frozen=True)
class Trial:
    index: int
    config: TSDConfig
    settings: TrainSettings
    val_report: MetricReport
    val_loss: float
    n_params: int
    config_hash: str

    def rank_key(self) -> tuple:
        return (self.val_loss, self.n_params, self.config_hash, self.index)


def _apply(point: dict[str, Any], config: TSDConfig, settings: TrainSettings) -> tuple[TSDConfig, TrainSettings]:
    c = {k: v for k, v in point.items() if k in CONFIG_KEYS}
    s = {k: v for k, v in point.items() if k in SETTINGS_KEYS}
    return config.replace(**c), settings.replace(**s)


def _run_trial(args) -> Trial:
    index, config, settings, data = args
    result = train(config, settings, data)
    val = result.val_report
    loss = val.mse if settings.loss_kind == "mse" else val.mae
    digest = stable_hash(config.to_dict(), settings.to_dict())
    return Trial(index, config, settings, val, loss, parameter_count(config), digest)


def rank(trials: list[Trial]) -> list[Trial]:
    """Validation loss, then fewer parameters, then config hash."""
    return sorted(trials, key=Trial.rank_key)


def grid_search(
    grid: GridSpec,
    base_config: TSDConfig,
    base_settings: TrainSettings,
    data: ForecastData,
    workers: int = 1,
) -> list[Trial]:
    """Train every grid point (up to ``budget``) and return trials best-first."""
    jobs = [(i, *_apply(point, base_config, base_settings), data) for i, point in enumerate(grid.points())]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial, jobs))
    else:
        trials = [_run_trial(job) for job in jobs]
    return rank(trials)
