"""Sliding windows and the train/val/test bundle handed to training."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tsd.data.frame import TimeSeriesFrame
from tsd.data.split import MODES, PARTITIONS, SplitSpec, Standardizer, admissible_origins, split
from tsd.errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class WindowSample:
    inputs: np.ndarray  # [C_in, lookback]
    targets: np.ndarray  # [n_targets, horizon]
    origin_index: int


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Stacked windows: ``inputs [n, C_in, lookback]``, ``targets [n, N, H]``.

    The first ``N`` input channels are the target series; any covariates follow.
    """

    inputs: np.ndarray
    targets: np.ndarray
    origins: np.ndarray

    def __post_init__(self):
        if not (len(self.inputs) == len(self.targets) == len(self.origins)):
            raise DimensionError(
                f"window arrays disagree: inputs {self.inputs.shape}, targets {self.targets.shape}, origins {self.origins.shape}"
            )

    def __len__(self) -> int:
        return len(self.origins)

    def __getitem__(self, i: int) -> WindowSample:
        return WindowSample(self.inputs[i], self.targets[i], int(self.origins[i]))

    @property
    def lookback(self) -> int:
        return self.inputs.shape[-1]

    @property
    def horizon(self) -> int:
        return self.targets.shape[-1]

    @property
    def n_targets(self) -> int:
        return self.targets.shape[1]

    def take(self, index) -> "WindowSet":
        return WindowSet(self.inputs[index], self.targets[index], self.origins[index])


def window_count(span: int, stride: int) -> int:
    """``floor((span - 1) / stride) + 1`` windows over ``span`` admissible origins."""
    return 0 if span <= 0 else (span - 1) // stride + 1


def make_windows(
    values: np.ndarray,
    spec: SplitSpec,
    partition: str,
    lookback: int,
    horizon: int,
    stride: int = 1,
    target_index: int = 0,
    covariates: np.ndarray | None = None,
) -> WindowSet:
    """Cut every ``stride``-th admissible window of ``partition``.

    Args:
        values: ``[T, C]`` series (usually standardized).
        spec: split boundaries; ``spec.mode == "univariate"`` keeps only the
            target channel for inputs and targets.
        covariates: optional ``[T, X]`` features appended to the inputs only.

    Raises:
        ConfigurationError: no admissible origin, or ``stride < 1``.
    """
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != spec.n_rows:
        raise DimensionError(f"values have {values.shape[0]} rows, split expects {spec.n_rows}")
    origins = np.asarray(admissible_origins(spec, partition, lookback, horizon)[::stride], dtype=np.int64)
    series = values[:, [target_index]] if spec.mode == "univariate" else values
    inputs_src = series if covariates is None else np.concatenate([series, covariates], axis=1)
    # [T, C] -> [C, T] then gather the windows with fancy indexing
    src = inputs_src.T
    back = np.arange(-lookback + 1, 1)
    ahead = np.arange(1, horizon + 1)
    inputs = src[:, origins[:, None] + back].transpose(1, 0, 2)
    targets = series.T[:, origins[:, None] + ahead].transpose(1, 0, 2)
    return WindowSet(np.ascontiguousarray(inputs), np.ascontiguousarray(targets), origins)


@dataclass(frozen=True, eq=False)
class ForecastData:
    """Everything training and evaluation need for one (dataset, mode, horizon)."""

    train: WindowSet
    val: WindowSet
    test: WindowSet
    name: str = "fixture"
    mode: str = "multivariate"
    kind: str = "generic"
    spec: SplitSpec | None = None
    standardizer: Standardizer | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for part in PARTITIONS:
            ws = getattr(self, part)
            if len(ws) == 0:
                raise ConfigurationError(f"{part} partition has no windows")
        shapes = {(ws.inputs.shape[1:], ws.targets.shape[1:]) for ws in (self.train, self.val, self.test)}
        if len(shapes) != 1:
            raise DimensionError(f"partitions disagree on window shapes: {sorted(shapes)}")

    def partition(self, name: str) -> WindowSet:
        if name not in PARTITIONS:
            raise ConfigurationError(f"unknown partition {name!r}; expected one of {PARTITIONS}")
        return getattr(self, name)

    @property
    def lookback(self) -> int:
        return self.train.lookback

    @property
    def horizon(self) -> int:
        return self.train.horizon

    @property
    def n_targets(self) -> int:
        return self.train.n_targets

    @property
    def input_channels(self) -> int:
        return self.train.inputs.shape[1]

    @classmethod
    def from_arrays(cls, train, val=None, test=None, **kw) -> "ForecastData":
        """Bundle raw ``(inputs, targets)`` pairs; missing partitions reuse ``train``."""

        def build(pair):
            inputs, targets = (np.asarray(a, dtype=np.float64) for a in pair)
            return WindowSet(inputs, targets, np.arange(len(inputs)))

        tr = build(train)
        return cls(tr, build(val) if val is not None else tr, build(test) if test is not None else tr, **kw)


def prepare(
    frame: TimeSeriesFrame,
    lookback: int,
    horizon: int,
    mode: str = "multivariate",
    stride: int = 1,
    calendar: bool = False,
    name: str | None = None,
) -> ForecastData:
    """Split 7:1:2, standardize on train, and window all three partitions."""
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    spec = split(frame.n_rows, lookback, horizon, mode)
    scaler = Standardizer.fit(frame.values, spec, frame.channel_names)
    values = scaler.transform(frame.values)
    covariates = frame.calendar_features() if calendar else None
    parts = {
        p: make_windows(values, spec, p, lookback, horizon, stride, frame.target_index, covariates) for p in PARTITIONS
    }
    return ForecastData(
        parts["train"],
        parts["val"],
        parts["test"],
        name=name or frame.kind,
        mode=mode,
        kind=frame.kind,
        spec=spec,
        standardizer=scaler,
    )
