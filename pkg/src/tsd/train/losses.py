"""Differentiable point-forecast losses (means over every element)."""

from __future__ import annotations

import numpy as np

from tsd.autodiff.tensor import Tensor
from tsd.errors import ConfigurationError, DimensionError

LOSS_KINDS = ("mse", "mae")


def _pair(pred, truth) -> tuple[Tensor, Tensor]:
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    truth = truth if isinstance(truth, Tensor) else Tensor(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {truth.shape}")
    return pred, truth


def mse(pred, truth) -> Tensor:
    pred, truth = _pair(pred, truth)
    return ((pred - truth) * (pred - truth)).mean()


def mae(pred, truth) -> Tensor:
    pred, truth = _pair(pred, truth)
    return (pred - truth).abs().mean()


def loss_fn(kind: str):
    if kind not in LOSS_KINDS:
        raise ConfigurationError(f"loss_kind must be one of {LOSS_KINDS}, got {kind!r}")
    return mse if kind == "mse" else mae


def error_metrics(pred: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """Plain-array ``(mse, mae)``."""
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {truth.shape}")
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    return float(np.mean(diff * diff)), float(np.mean(np.abs(diff)))
