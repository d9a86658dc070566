"""Chronological 7:1:2 split and train-only standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tsd.errors import ConfigurationError, SchemaError

PARTITIONS = ("train", "val", "test")
MODES = ("multivariate", "univariate")


@dataclass(frozen=True)
class SplitSpec:
    """Row boundaries: train ``[0, train_end)``, val ``[train_end, val_end)``, test ``[val_end, n_rows)``."""

    train_end: int
    val_end: int
    n_rows: int
    mode: str = "multivariate"

    def bounds(self, partition: str) -> tuple[int, int]:
        if partition == "train":
            return 0, self.train_end
        if partition == "val":
            return self.train_end, self.val_end
        if partition == "test":
            return self.val_end, self.n_rows
        raise ConfigurationError(f"unknown partition {partition!r}; expected one of {PARTITIONS}")


def split_boundaries(n_rows: int) -> tuple[int, int]:
    # integer arithmetic so 0.7 * T never rounds the wrong way
    return 7 * n_rows // 10, 8 * n_rows // 10


def admissible_origins(spec: SplitSpec, partition: str, lookback: int, horizon: int) -> range:
    """Origins ``o`` whose targets ``(o, o + H]`` stay inside the partition.

    The origin itself lies in the partition and the lookback
    ``[o - lookback + 1, o]`` must start at row 0 or later; it may reach
    back into the previous partition.

    Raises:
        ConfigurationError: no origin is admissible.
    """
    if lookback < 1 or horizon < 1:
        raise ConfigurationError(f"lookback and horizon must be positive, got {lookback}, {horizon}")
    start, end = spec.bounds(partition)
    first = max(start, lookback - 1)
    last = end - horizon - 1
    if last < first:
        raise ConfigurationError(
            f"{partition} partition [{start}, {end}) admits no window: origins need "
            f"max({start}, lookback-1={lookback - 1}) <= o <= end-H-1={last}"
        )
    return range(first, last + 1)


def split(n_rows: int, lookback: int, horizon: int, mode: str = "multivariate") -> SplitSpec:
    """Boundaries for ``n_rows`` rows, checked to admit at least one window per partition.

    Raises:
        ConfigurationError: a partition is too short for one (lookback, horizon) window.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    train_end, val_end = split_boundaries(n_rows)
    spec = SplitSpec(train_end, val_end, n_rows, mode)
    if not 0 < train_end < val_end < n_rows:
        raise ConfigurationError(f"T={n_rows} is too small to split 7:1:2")
    for partition in PARTITIONS:
        admissible_origins(spec, partition, lookback, horizon)
    return spec


@dataclass(frozen=True)
class Standardizer:
    """Per-channel z-score; statistics come from the training rows only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray, spec: SplitSpec, channel_names=None) -> "Standardizer":
        train = np.asarray(values[: spec.train_end], dtype=np.float64)
        if train.shape[0] == 0:
            raise ConfigurationError("training partition is empty")
        mean = train.mean(axis=0)
        std = train.std(axis=0)
        flat = np.nonzero(std == 0)[0]
        if flat.size:
            names = [channel_names[i] if channel_names else str(i) for i in flat]
            raise SchemaError(f"constant channel(s) in the training partition: {names}")
        return cls(mean, std)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}
