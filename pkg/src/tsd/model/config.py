"""Architecture hyperparameters and the closed-form parameter count."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from tsd.errors import ConfigurationError, DepthError

POOLING_KINDS = ("max", "average")
HEAD_KINDS = ("direct-multi-horizon",)
PRECISIONS = {"float64": np.float64, "float32": np.float32}
CALENDAR_FEATURES = 4  # sin/cos hour-of-day, sin/cos day-of-week
KERNEL = 3


@dataclass(frozen=True)
class TSDConfig:
    """Architecture record.

    ``d_model`` is the token width; the token count equals ``lookback``
    because the tokenizer is a stride-1 convolution.
    """

    lookback: int = 96
    horizon: int = 24
    n_channels: int = 7
    d_model: int = 512
    n_heads: int = 8
    n_blocks: int = 4
    dropout: float = 0.05
    pooling: str = "max"
    ffn_dim: int = 2048
    base_channels: int = 64
    head_kind: str = "direct-multi-horizon"
    residual_attention: bool = False
    calendar_covariates: bool = False
    precision: str = "float64"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("lookback", "horizon", "n_channels", "d_model", "n_heads", "n_blocks", "ffn_dim", "base_channels"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if self.d_model % self.n_heads:
            raise ConfigurationError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if self.d_model % 2:
            raise ConfigurationError(f"d_model={self.d_model} must be even for the positional encoding")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.pooling not in POOLING_KINDS:
            raise ConfigurationError(f"pooling must be one of {POOLING_KINDS}, got {self.pooling!r}")
        if self.head_kind not in HEAD_KINDS:
            raise ConfigurationError(f"head_kind must be one of {HEAD_KINDS}, got {self.head_kind!r}")
        if self.precision not in PRECISIONS:
            raise ConfigurationError(f"precision must be one of {tuple(PRECISIONS)}, got {self.precision!r}")
        if self.lookback < 2**self.n_blocks:
            raise DepthError(
                f"lookback {self.lookback} < 2**n_blocks = {2 ** self.n_blocks}; use fewer blocks or a longer lookback"
            )

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def input_channels(self) -> int:
        return self.n_channels + (CALENDAR_FEATURES if self.calendar_covariates else 0)

    @property
    def n_targets(self) -> int:
        return self.n_channels

    def block_channels(self, depth: int) -> int:
        """Output channels of the down and up block at ``depth`` (1-based)."""
        return self.base_channels * 2 ** (depth - 1)

    def up_input_channels(self, depth: int) -> int:
        if depth == self.n_blocks:
            return self.block_channels(depth)
        return self.block_channels(depth) + self.block_channels(depth + 1)

    def replace(self, **changes) -> "TSDConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TSDConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown TSDConfig key(s): {', '.join(unknown)}")
        return cls(**data)


def parameter_count(config: TSDConfig) -> int:
    """Exact trainable-scalar count, from the config alone.

    With ``d = d_model``, ``f = ffn_dim``, ``c_i = base_channels * 2**(i-1)``,
    ``k = 3``::

        tokenizer   k*C_in*d + d
        attention   4*(d*d + d)
        norms       2*2*d                 (two inside the attention block)
        ffn         d*f + f + f*d + d
        down i      k*in_i*c_i + c_i      in_1 = d, in_i = c_{i-1}
        up i        k*u_i*c_i + c_i + k*c_i*c_i + c_i
                                          u_L = c_L, u_i = c_i + c_{i+1}
        out norm    2*c_1
        head        c_1*lookback*N*H + N*H
    """
    k = KERNEL
    d, f = config.d_model, config.ffn_dim
    total = k * config.input_channels * d + d
    total += 4 * (d * d + d) + 4 * d + (d * f + f + f * d + d)
    prev = d
    for depth in range(1, config.n_blocks + 1):
        c = config.block_channels(depth)
        total += k * prev * c + c
        u = config.up_input_channels(depth)
        total += k * u * c + c + k * c * c + c
        prev = c
    c1 = config.block_channels(1)
    total += 2 * c1
    outputs = config.n_targets * config.horizon
    total += c1 * config.lookback * outputs + outputs
    return total


def stable_hash(*records: dict[str, Any]) -> str:
    """Short sha256 over canonical JSON of ``records``."""
    blob = json.dumps(records, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
