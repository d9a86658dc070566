"""The TSD forecaster: tokenizer, temporal self-attention, U-shaped conv stack, head.

Data flow for one window ``[C_in, lookback]``::

    tokens = Conv1d(window)                         [d_model, T]
    a      = LN(FFN(LN(SelfAttention(tokens + PE))))
    down_1 = ConvDown(a), down_i = ConvDown(down_{i-1})
    up_L   = ConvUp(down_L), up_i = ConvUp(down_i ++ up_{i+1})
    tsd    = LN(up_1) over channels                 [c_1, T]
    y      = Linear(flatten(tsd))                   [N, horizon]

Everything runs batched, ``[B, C, L]``; unbatched windows are promoted.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from tsd.autodiff import functional as F
from tsd.autodiff.tensor import Tensor, no_grad
from tsd.errors import ConsistencyError, DepthError, DimensionError
from tsd.model.config import KERNEL, TSDConfig
from tsd.model.layers import Conv1d, ConvTranspose1d, LayerNorm, Linear, Module

Capture = Callable[[str, int, Tensor], None]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; the single source of randomness for a run."""
    return np.random.Generator(np.random.Philox(seed))


def halved_length(length: int) -> int:
    """Length after a kernel-3, stride-2, padding-1 pool (``ceil(L/2)``)."""
    return F.conv_output_length(length, KERNEL, 2, 1)


def up_output_padding(length: int, target_length: int) -> int:
    """``output_padding`` making a stride-2 transposed conv land on ``target_length``."""
    base = F.conv_transpose_output_length(length, KERNEL, 2, 1, 0)
    pad = target_length - base
    if pad not in (0, 1):
        raise ConsistencyError(
            f"cannot upsample length {length} to {target_length}: reachable lengths are {base} and {base + 1}"
        )
    return pad


class Tokenizer(Module):
    """Stride-1, same-padded convolution mapping channels to token width."""

    def __init__(self, c_in: int, d_model: int, rng, dtype):
        self.conv = Conv1d("tokenizer.conv", c_in, d_model, KERNEL, rng, dtype, padding=1)

    def __call__(self, window: Tensor) -> Tensor:
        c_in = self.conv.weight.shape[1]
        if window.shape[-2] != c_in:
            raise DimensionError(f"tokenizer trained for {c_in} input channels, window has shape {window.shape}")
        return self.conv(window)


class MultiHeadSelfAttention(Module):
    def __init__(self, d_model: int, n_heads: int, rng, dtype):
        self.n_heads = n_heads
        self.q = Linear("tsa.attn", d_model, d_model, rng, dtype, "w_q", "b_q")
        self.k = Linear("tsa.attn", d_model, d_model, rng, dtype, "w_k", "b_k")
        self.v = Linear("tsa.attn", d_model, d_model, rng, dtype, "w_v", "b_v")
        self.o = Linear("tsa.attn", d_model, d_model, rng, dtype, "w_o", "b_o")

    def __call__(self, x: Tensor) -> Tensor:
        """``x`` is ``[B, T, D]``; attention runs over the ``T`` positions."""
        b, t, d = x.shape
        h = self.n_heads
        dh = d // h

        def heads(y: Tensor) -> Tensor:
            return y.reshape(b, t, h, dh).transpose(0, 2, 1, 3)

        q, k, v = heads(self.q(x)), heads(self.k(x)), heads(self.v(x))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))
        weights = F.softmax(scores, axis=-1)
        context = (weights @ v).transpose(0, 2, 1, 3).reshape(b, t, d)
        return self.o(context)


class TemporalSelfAttention(Module):
    """``LN(FFN(LN(SelfAttention(z + PE))))``, residuals only when asked for."""

    def __init__(self, config: TSDConfig, rng, dtype):
        d = config.d_model
        self.dropout = config.dropout
        self.residual = config.residual_attention
        self.attn = MultiHeadSelfAttention(d, config.n_heads, rng, dtype)
        self.norm1 = LayerNorm("tsa.norm1", d, dtype)
        self.ffn_in = Linear("tsa.ffn.in", d, config.ffn_dim, rng, dtype)
        self.ffn_out = Linear("tsa.ffn.out", config.ffn_dim, d, rng, dtype)
        self.norm2 = LayerNorm("tsa.norm2", d, dtype)

    def ffn(self, x: Tensor, training: bool, rng) -> Tensor:
        hidden = F.dropout(F.relu(self.ffn_in(x)), self.dropout, training, rng)
        return self.ffn_out(hidden)

    def __call__(self, tokens: Tensor, training: bool = False, rng=None) -> Tensor:
        x = tokens.transpose(0, 2, 1)
        attended = self.attn(x)
        a = self.norm1(x + attended if self.residual else attended)
        f = self.ffn(a, training, rng)
        out = self.norm2(a + f if self.residual else f)
        return out.transpose(0, 2, 1)


class ConvDown(Module):
    """``Dropout(Pool(ReLU(Conv1d(h))))``; pooling halves the length."""

    def __init__(self, depth: int, c_in: int, c_out: int, pooling: str, dropout: float, rng, dtype):
        self.depth = depth
        self.pooling = pooling
        self.dropout = dropout
        self.conv = Conv1d(f"down{depth}.conv", c_in, c_out, KERNEL, rng, dtype, padding=1)

    def __call__(self, h: Tensor, training: bool = False, rng=None) -> Tensor:
        if h.shape[-1] < 2:
            raise DepthError(f"down block {self.depth} got length {h.shape[-1]} < 2; reduce n_blocks")
        x = F.relu(self.conv(h))
        pool = F.max_pool1d if self.pooling == "max" else F.avg_pool1d
        x = pool(x, KERNEL, 2, 1)
        return F.dropout(x, self.dropout, training, rng)


class ConvUp(Module):
    """``Dropout(ConvT1d(ReLU(Conv1d(h))))``, landing exactly on ``target_length``."""

    def __init__(self, depth: int, c_in: int, c_out: int, dropout: float, rng, dtype):
        self.depth = depth
        self.dropout = dropout
        self.conv = Conv1d(f"up{depth}.conv", c_in, c_out, KERNEL, rng, dtype, padding=1)
        self.deconv = ConvTranspose1d(f"up{depth}.deconv", c_out, c_out, KERNEL, rng, dtype, stride=2, padding=1)

    def __call__(self, h: Tensor, target_length: int, training: bool = False, rng=None) -> Tensor:
        pad = up_output_padding(h.shape[-1], target_length)
        x = self.deconv(F.relu(self.conv(h)), pad)
        return F.dropout(x, self.dropout, training, rng)


class TSDStack(Module):
    """Contracting/expanding path with skip concatenation and a channel LN."""

    def __init__(self, config: TSDConfig, rng, dtype):
        self.n_blocks = config.n_blocks
        self.down = []
        prev = config.d_model
        for depth in range(1, config.n_blocks + 1):
            c = config.block_channels(depth)
            self.down.append(ConvDown(depth, prev, c, config.pooling, config.dropout, rng, dtype))
            prev = c
        self.up = []
        for depth in range(config.n_blocks, 0, -1):
            c_in = config.up_input_channels(depth)
            if depth < config.n_blocks:
                expected = config.base_channels * 2 ** (depth - 1) + config.base_channels * 2**depth
                if c_in != expected:
                    raise ConsistencyError(f"up block {depth} input channels {c_in} != {expected}")
            self.up.append(ConvUp(depth, c_in, config.block_channels(depth), config.dropout, rng, dtype))
        self.norm = LayerNorm("out_norm", config.block_channels(1), dtype)
        self.recorded_lengths: list[int] = []

    def __call__(self, h: Tensor, training: bool = False, rng=None, capture: Capture | None = None) -> Tensor:
        length = h.shape[-1]
        if length < 2**self.n_blocks:
            raise DepthError(f"{length} tokens cannot pass {self.n_blocks} halvings; need at least {2 ** self.n_blocks}")
        lengths = [length]
        downs = []
        x = h
        for block in self.down:
            x = block(x, training, rng)
            downs.append(x)
            lengths.append(x.shape[-1])
            if capture:
                capture(f"down{block.depth}", block.depth, x)
        self.recorded_lengths = lengths
        x = None
        for block in self.up:
            i = block.depth
            inp = downs[i - 1] if x is None else F.concat([downs[i - 1], x], axis=-2)
            x = block(inp, lengths[i - 1], training, rng)
            if capture:
                capture(f"up{i}", i - 1, x)
        return self.norm(x.transpose(0, 2, 1)).transpose(0, 2, 1)


class ForecastHead(Module):
    """One affine map from the flattened representation to every horizon step."""

    def __init__(self, c1: int, tokens: int, n_targets: int, horizon: int, rng, dtype):
        self.n_targets = n_targets
        self.horizon = horizon
        self.linear = Linear("head", c1 * tokens, n_targets * horizon, rng, dtype)

    def __call__(self, h: Tensor) -> Tensor:
        b = h.shape[0]
        flat = h.reshape(b, -1)
        if flat.shape[-1] != self.linear.weight.shape[1]:
            raise DimensionError(f"head expects {self.linear.weight.shape[1]} features, got input shape {h.shape}")
        return self.linear(flat).reshape(b, self.n_targets, self.horizon)


class TSDModel(Module):
    """Full forecaster.  ``forward`` maps ``[C_in, T]`` or ``[B, C_in, T]`` windows
    to ``[N, H]`` or ``[B, N, H]`` forecasts."""

    def __init__(self, config: TSDConfig, seed: int = 0):
        config.validate()
        self.config = config
        dtype = config.dtype
        rng = make_rng(seed)
        self.tokenizer = Tokenizer(config.input_channels, config.d_model, rng, dtype)
        self.pe = F.positional_encoding(config.lookback, config.d_model, dtype)
        self.tsa = TemporalSelfAttention(config, rng, dtype)
        self.stack = TSDStack(config, rng, dtype)
        self.head = ForecastHead(config.block_channels(1), config.lookback, config.n_targets, config.horizon, rng, dtype)
        names = [name for name, _ in self.named_parameters()]
        if len(names) != len(set(names)):
            raise ConsistencyError("parameter names are not unique")

    @property
    def recorded_lengths(self) -> list[int]:
        return self.stack.recorded_lengths

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise ConsistencyError(f"state mismatch; missing={missing}, unexpected={extra}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise DimensionError(f"{name}: stored shape {state[name].shape} != {p.shape}")
            p.data = np.array(state[name], dtype=p.dtype)

    def embed(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        tokens = self.tokenizer(x)
        return self.tsa(tokens + self.pe, training, rng)

    def forward(self, window, training: bool = False, rng=None, capture: Capture | None = None) -> Tensor:
        data = window.data if isinstance(window, Tensor) else np.asarray(window)
        squeeze = data.ndim == 2
        x = Tensor(data[None] if squeeze else data, dtype=self.config.dtype)
        if x.shape[-1] != self.config.lookback:
            raise DimensionError(f"model lookback is {self.config.lookback}, window has shape {data.shape}")
        rep = self.stack(self.embed(x, training, rng), training, rng, capture)
        out = self.head(rep)
        return out.reshape(out.shape[1:]) if squeeze else out

    __call__ = forward

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        """Eval-mode forecast without tape recording."""
        with no_grad():
            return self.forward(inputs).data
