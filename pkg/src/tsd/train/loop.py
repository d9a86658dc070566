"""Training loop, evaluation and run settings."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Protocol

import numpy as np

from tsd.data.windows import ForecastData, WindowSet
from tsd.errors import ConfigurationError, DimensionError, NumericalError
from tsd.model.config import TSDConfig, stable_hash
from tsd.model.tsd import TSDModel
from tsd.train.losses import LOSS_KINDS, error_metrics, loss_fn
from tsd.train.optim import AdamW, lr_at
from tsd.train.report import MetricReport

EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainSettings:
    """Optimization record.  Repeat ``r`` uses seed ``seed + r``."""

    loss_kind: str = "mse"
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    scheduler_gamma: float = 0.95
    scheduler_step: int = 2
    epochs: int = 15
    batch_size: int = 32
    seed: int = 0
    repeats: int = 1
    max_steps: int | None = None  # cap on optimizer steps per repeat

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigurationError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 < self.scheduler_gamma <= 1:
            raise ConfigurationError(f"scheduler_gamma must be in (0, 1], got {self.scheduler_gamma}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("scheduler_step", "epochs", "batch_size", "repeats"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if self.max_steps is not None and (not isinstance(self.max_steps, int) or self.max_steps < 1):
            raise ConfigurationError(f"max_steps must be a positive integer or null, got {self.max_steps!r}")

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(self.seed + r for r in range(self.repeats))

    def replace(self, **changes) -> "TrainSettings":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainSettings":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown TrainSettings key(s): {', '.join(unknown)}")
        return cls(**data)


class Predictor(Protocol):
    def predict(self, inputs: np.ndarray) -> np.ndarray: ...


def predict_all(predictor: Predictor, windows: WindowSet, batch: int = EVAL_BATCH) -> np.ndarray:
    chunks = [predictor.predict(windows.inputs[i : i + batch]) for i in range(0, len(windows), batch)]
    return np.concatenate(chunks, axis=0)


def partition_metrics(predictor: Predictor, windows: WindowSet) -> tuple[float, float]:
    """``(mse, mae)`` over every window, in the space the windows are stored in."""
    horizon = getattr(getattr(predictor, "config", None), "horizon", None)
    if horizon is not None and horizon != windows.horizon:
        raise DimensionError(f"model horizon {horizon} != data horizon {windows.horizon}")
    preds = predict_all(predictor, windows)
    if preds.shape != windows.targets.shape:
        raise DimensionError(f"predictions {preds.shape} do not match targets {windows.targets.shape}")
    return error_metrics(preds, windows.targets)


def run_hash(config: TSDConfig, settings: "TrainSettings | None", data: ForecastData) -> str:
    return stable_hash(
        config.to_dict(),
        settings.to_dict() if settings else {},
        {"dataset": data.name, "mode": data.mode, "horizon": data.horizon},
    )


def evaluate(
    model: Predictor,
    data: ForecastData,
    partition: str = "test",
    config_hash: str = "",
    seeds: tuple[int, ...] = (0,),
) -> MetricReport:
    """Eval-mode metrics on ``partition`` as a one-repeat report."""
    m, a = partition_metrics(model, data.partition(partition))
    return MetricReport(data.name, data.mode, data.horizon, m, a, len(seeds), tuple(seeds), config_hash)


@dataclass
class TrainResult:
    model: TSDModel
    report: MetricReport  # test metrics, averaged over repeats
    val_report: MetricReport
    history: list[dict[str, Any]] = field(default_factory=list)
    initial_val_loss: float = math.inf
    best_val_loss: float = math.inf
    steps: int = 0


def check_compatible(config: TSDConfig, data: ForecastData) -> None:
    pairs = [
        ("lookback", config.lookback, data.lookback),
        ("horizon", config.horizon, data.horizon),
        ("input channels", config.input_channels, data.input_channels),
        ("targets", config.n_targets, data.n_targets),
    ]
    for what, ours, theirs in pairs:
        if ours != theirs:
            raise DimensionError(f"config {what} is {ours} but the data has {theirs}")


def _validation_loss(model: TSDModel, windows: WindowSet, kind: str) -> float:
    m, a = partition_metrics(model, windows)
    return m if kind == "mse" else a


def train_once(
    config: TSDConfig,
    settings: TrainSettings,
    data: ForecastData,
    seed: int,
    on_epoch: Callable[[dict[str, Any]], None] | None = None,
) -> tuple[TSDModel, list[dict[str, Any]], float, float, int]:
    """One repeat; returns ``(best model, history, initial val, best val, steps)``."""
    model = TSDModel(config, seed=seed)
    rng = np.random.Generator(np.random.Philox(seed).jumped())  # independent of the init stream
    opt = AdamW(model.parameters(), settings.learning_rate, settings.weight_decay)
    objective = loss_fn(settings.loss_kind)
    train = data.train
    inputs, targets = train.inputs.astype(config.dtype), train.targets.astype(config.dtype)
    n = len(train)
    initial = _validation_loss(model, data.val, settings.loss_kind)
    best_val, best_state = initial, model.state_dict()
    history: list[dict[str, Any]] = []
    steps = 0
    for epoch in range(settings.epochs):
        lr = lr_at(epoch, settings.learning_rate, settings.scheduler_gamma, settings.scheduler_step)
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, settings.batch_size):
            idx = np.sort(order[start : start + settings.batch_size])
            with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
                pred = model.forward(inputs[idx], training=True, rng=rng)
                loss = objective(pred, targets[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise NumericalError(
                    f"non-finite {settings.loss_kind} loss ({value}) at seed {seed}, epoch {epoch}, step {steps}"
                )
            opt.zero_grad()
            with np.errstate(over="ignore", invalid="ignore"):
                loss.backward()
                opt.step(lr)
            steps += 1
            total += value * len(idx)
            seen += len(idx)
            if settings.max_steps is not None and steps >= settings.max_steps:
                break
        with np.errstate(over="ignore", invalid="ignore"):
            val_mse, val_mae = partition_metrics(model, data.val)
        val = val_mse if settings.loss_kind == "mse" else val_mae
        if not math.isfinite(val):
            raise NumericalError(f"non-finite validation {settings.loss_kind} ({val}) at seed {seed}, epoch {epoch}")
        row = {
            "seed": seed,
            "epoch": epoch,
            "steps": steps,
            "lr": lr,
            "train_loss": total / seen,
            "val_mse": val_mse,
            "val_mae": val_mae,
        }
        history.append(row)
        if on_epoch:
            on_epoch(row)
        if val < best_val:
            best_val, best_state = val, model.state_dict()
        if settings.max_steps is not None and steps >= settings.max_steps:
            break
    # the untrained weights stay a candidate, so the kept model never validates worse than init
    model.load_state_dict(best_state)
    return model, history, initial, best_val, steps


def train(
    config: TSDConfig,
    settings: TrainSettings,
    data: ForecastData,
    on_epoch: Callable[[dict[str, Any]], None] | None = None,
    record_time: bool = False,
) -> TrainResult:
    """Train ``settings.repeats`` models and average their test metrics.

    Raises:
        DimensionError: config and data shapes disagree.
        NumericalError: a mini-batch loss is not finite.
    """
    check_compatible(config, data)
    started = time.perf_counter()
    digest = run_hash(config, settings, data)
    runs = []
    history: list[dict[str, Any]] = []
    for seed in settings.seeds:
        model, hist, initial, best, steps = train_once(config, settings, data, seed, on_epoch)
        history.extend(hist)
        test = partition_metrics(model, data.test)
        val = partition_metrics(model, data.val)
        runs.append((best, seed, model, test, val, initial, steps))
    best_run = min(runs, key=lambda r: (r[0], r[1]))
    wall = time.perf_counter() - started if record_time else None
    seeds = settings.seeds

    def averaged(index: int) -> tuple[float, float]:
        return float(np.mean([r[index][0] for r in runs])), float(np.mean([r[index][1] for r in runs]))

    test_mse, test_mae = averaged(3)
    val_mse, val_mae = averaged(4)
    report = MetricReport(data.name, data.mode, data.horizon, test_mse, test_mae, len(seeds), seeds, digest, wall)
    val_report = MetricReport(data.name, data.mode, data.horizon, val_mse, val_mae, len(seeds), seeds, digest, wall)
    return TrainResult(
        best_run[2],
        report,
        val_report,
        history,
        initial_val_loss=float(np.mean([r[5] for r in runs])),
        best_val_loss=float(np.mean([r[0] for r in runs])),
        steps=sum(r[6] for r in runs),
    )
