"""Per-block activation-magnitude maps over token positions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tsd.autodiff.tensor import Tensor, no_grad
from tsd.model.tsd import TSDModel


@dataclass
class SaliencyMap:
    block: str
    level: int
    values: np.ndarray  # [channels, tokens], absolute activations
    token_stride: int

    @property
    def channel_mean_abs(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @property
    def n_tokens(self) -> int:
        return self.values.shape[1]


def extract_saliency(model: TSDModel, window) -> list[SaliencyMap]:
    """Maps for every down block, then every up block from deepest to ``up1``.

    Token ``j`` of a map at level ``l`` covers input steps starting at
    ``j * 2**l``.
    """
    data = window.data if isinstance(window, Tensor) else np.asarray(window)
    if data.ndim != 2:
        raise ValueError(f"extract_saliency takes one [C, T] window, got shape {data.shape}")
    maps: list[SaliencyMap] = []

    def capture(block: str, level: int, activation: Tensor) -> None:
        maps.append(SaliencyMap(block, level, np.abs(activation.data[0]).copy(), 2**level))

    with no_grad():
        model.forward(data, training=False, capture=capture)
    return maps
