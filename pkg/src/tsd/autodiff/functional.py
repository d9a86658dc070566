"""Differentiable primitives used by the forecasting model.

Sequence ops take ``[C, L]`` or batched ``[B, C, L]`` input and return the
same rank.  Padding is explicit and symmetric; callers compute the amount.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tsd.autodiff.tensor import Tensor
from tsd.errors import DimensionError, ParameterError, UsageError


def _as_batched(x: Tensor) -> tuple[np.ndarray, bool]:
    if x.ndim == 2:
        return x.data[None], True
    if x.ndim == 3:
        return x.data, False
    raise DimensionError(f"expected [C, L] or [B, C, L], got shape {x.shape}")


def _unbatch(arr: np.ndarray, squeeze: bool) -> np.ndarray:
    return arr[0] if squeeze else arr


def conv_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def conv_transpose_output_length(length: int, kernel: int, stride: int, padding: int, output_padding: int = 0) -> int:
    return (length - 1) * stride - 2 * padding + kernel + output_padding


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over the last axis with zero padding.

    ``weight`` is ``[C_out, C_in, k]``; output length is
    ``floor((L + 2*padding - k) / stride) + 1``.
    """
    xb, squeeze = _as_batched(x)
    c_out, c_in, k = weight.shape
    batch, channels, length = xb.shape
    if channels != c_in:
        raise DimensionError(f"conv1d input channels {channels} (input shape {x.shape}) != weight C_in {c_in} (weight shape {weight.shape})")
    if k < 1 or stride < 1 or padding < 0:
        raise ParameterError(f"conv1d needs k >= 1, stride >= 1, padding >= 0; got k={k}, stride={stride}, padding={padding}")
    if length + 2 * padding < k:
        raise ParameterError(f"conv1d kernel {k} longer than padded input {length + 2 * padding}")
    out_len = conv_output_length(length, k, stride, padding)
    xp = np.pad(xb, ((0, 0), (0, 0), (padding, padding))) if padding else xb
    windows = sliding_window_view(xp, k, axis=2)[:, :, : stride * (out_len - 1) + 1 : stride, :]
    cols = windows.transpose(0, 2, 1, 3).reshape(batch * out_len, c_in * k)
    w2 = weight.data.reshape(c_out, c_in * k)
    out = (cols @ w2.T).reshape(batch, out_len, c_out).transpose(0, 2, 1)
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = np.ascontiguousarray(out)

    def back(g):
        gb3 = g[None] if squeeze else g
        gcol = gb3.transpose(0, 2, 1).reshape(batch * out_len, c_out)
        gw = (gcol.T @ cols).reshape(weight.shape) if weight.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (gcol @ w2).reshape(batch, out_len, c_in, k)
            gxp = np.zeros_like(xp)
            span = stride * (out_len - 1) + 1
            for j in range(k):
                gxp[:, :, j : j + span : stride] += gcols[:, :, :, j].transpose(0, 2, 1)
            gx = _unbatch(gxp[:, :, padding : padding + length], squeeze)
        gbias = gb3.sum(axis=(0, 2)) if bias is not None and bias.requires_grad else None
        return gx, gw, gbias

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op("conv1d", _unbatch(out, squeeze), inputs, back)


def conv_transpose1d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Adjoint of :func:`conv1d` (scatter-add), plus bias.

    ``weight`` is ``[C_in, C_out, k]``; output length is
    ``(L - 1)*stride - 2*padding + k + output_padding``.
    """
    if not 0 <= output_padding < stride:
        raise ParameterError(f"output_padding must satisfy 0 <= output_padding < stride, got {output_padding} with stride {stride}")
    xb, squeeze = _as_batched(x)
    c_in, c_out, k = weight.shape
    batch, channels, length = xb.shape
    if channels != c_in:
        raise DimensionError(f"conv_transpose1d input channels {channels} (input shape {x.shape}) != weight C_in {c_in} (weight shape {weight.shape})")
    out_len = conv_transpose_output_length(length, k, stride, padding, output_padding)
    if out_len < 1:
        raise ParameterError(f"conv_transpose1d output length {out_len} < 1")
    full_len = (length - 1) * stride + k + output_padding
    span = stride * (length - 1) + 1
    xt = xb.transpose(0, 2, 1).reshape(batch * length, c_in)
    w2 = weight.data.reshape(c_in, c_out * k)
    contrib = (xt @ w2).reshape(batch, length, c_out, k)
    full = np.zeros((batch, c_out, full_len), dtype=np.result_type(xb, weight.data))
    for j in range(k):
        full[:, :, j : j + span : stride] += contrib[:, :, :, j].transpose(0, 2, 1)
    out = full[:, :, padding : padding + out_len]
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = np.ascontiguousarray(out)

    def back(g):
        gb3 = g[None] if squeeze else g
        gfull = np.zeros_like(full)
        gfull[:, :, padding : padding + out_len] = gb3
        gcontrib = np.empty((batch, length, c_out, k), dtype=full.dtype)
        for j in range(k):
            gcontrib[:, :, :, j] = gfull[:, :, j : j + span : stride].transpose(0, 2, 1)
        gcontrib = gcontrib.reshape(batch * length, c_out * k)
        gx = None
        if x.requires_grad:
            gx = _unbatch((gcontrib @ w2.T).reshape(batch, length, c_in).transpose(0, 2, 1), squeeze)
        gw = (xt.T @ gcontrib).reshape(weight.shape) if weight.requires_grad else None
        gbias = gb3.sum(axis=(0, 2)) if bias is not None and bias.requires_grad else None
        return gx, gw, gbias

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op("conv_transpose1d", _unbatch(out, squeeze), inputs, back)


def _pool_windows(x: Tensor, kernel: int, stride: int, padding: int, fill: float):
    if kernel < 1 or stride < 1 or padding < 0:
        raise ParameterError(f"pooling needs kernel >= 1, stride >= 1, padding >= 0; got {kernel}, {stride}, {padding}")
    if 2 * padding > kernel:
        raise ParameterError(f"padding {padding} > kernel/2 ({kernel}/2) leaves windows made only of padding")
    xb, squeeze = _as_batched(x)
    length = xb.shape[2]
    if length + 2 * padding < kernel:
        raise ParameterError(f"pool window {kernel} is empty after padding: padded length {length + 2 * padding}")
    out_len = conv_output_length(length, kernel, stride, padding)
    xp = np.pad(xb, ((0, 0), (0, 0), (padding, padding)), constant_values=fill) if padding else xb
    windows = sliding_window_view(xp, kernel, axis=2)[:, :, : stride * (out_len - 1) + 1 : stride, :]
    return xb, xp, windows, out_len, squeeze


def max_pool1d(x: Tensor, kernel: int, stride: int, padding: int = 0) -> Tensor:
    """Window max with ``-inf`` padding; ties route gradient to the first index."""
    xb, xp, windows, out_len, squeeze = _pool_windows(x, kernel, stride, padding, -np.inf)
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    length = xb.shape[2]

    def back(g):
        gb3 = g[None] if squeeze else g
        gxp = np.zeros(xp.shape, dtype=xb.dtype)
        span = stride * (out_len - 1) + 1
        for j in range(kernel):
            gxp[:, :, j : j + span : stride] += np.where(arg == j, gb3, 0.0)
        return (_unbatch(gxp[:, :, padding : padding + length], squeeze),)

    return Tensor.from_op("max_pool1d", _unbatch(np.ascontiguousarray(out), squeeze), (x,), back)


def avg_pool1d(x: Tensor, kernel: int, stride: int, padding: int = 0) -> Tensor:
    """Window mean with zero padding; the divisor is always ``kernel``."""
    xb, xp, windows, out_len, squeeze = _pool_windows(x, kernel, stride, padding, 0.0)
    out = windows.sum(axis=-1) / kernel
    length = xb.shape[2]

    def back(g):
        gb3 = (g[None] if squeeze else g) / kernel
        gxp = np.zeros(xp.shape, dtype=xb.dtype)
        span = stride * (out_len - 1) + 1
        for j in range(kernel):
            gxp[:, :, j : j + span : stride] += gb3
        return (_unbatch(gxp[:, :, padding : padding + length], squeeze),)

    return Tensor.from_op("avg_pool1d", _unbatch(out, squeeze), (x,), back)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op("relu", np.where(mask, x.data, 0.0).astype(x.dtype, copy=False), (x,), lambda g: (g * mask,))


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors scale by ``1/(1-rate)``, eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise UsageError("dropout in training mode needs an explicit rng")
    scale = 1.0 / (1.0 - rate)
    mask = (rng.random(x.shape, dtype=np.float32) >= np.float32(rate)).astype(x.dtype) * x.dtype.type(scale)
    return Tensor.from_op("dropout", x.data * mask, (x,), lambda g: (g * mask,))


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis (population variance), then scale and shift."""
    d = x.shape[-1]
    if gain.shape != (d,) or shift.shape != (d,):
        raise DimensionError(f"layer_norm over last axis {d} got gain {gain.shape} and shift {shift.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + shift.data

    def back(g):
        gx = None
        if x.requires_grad:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=lead) if gain.requires_grad else None
        gshift = g.sum(axis=lead) if shift.requires_grad else None
        return gx, ggain, gshift

    return Tensor.from_op("layer_norm", out, (x, gain, shift), back)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the trailing axis; ``weight`` is ``[D_out, D_in]``."""
    d_out, d_in = weight.shape
    if x.shape[-1] != d_in:
        raise DimensionError(f"linear expects trailing extent {d_in}, got input shape {x.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, d_in)
    out = x2 @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def back(g):
        g2 = g.reshape(-1, d_out)
        gx = (g2 @ weight.data).reshape(x.shape) if x.requires_grad else None
        gw = g2.T @ x2 if weight.requires_grad else None
        gb = g2.sum(axis=0) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op("linear", out.reshape(*lead, d_out), inputs, back)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    # in place on one buffer; attention scores are the largest arrays in a step
    y = x.data - x.data.max(axis=axis, keepdims=True)
    np.exp(y, out=y)
    y /= y.sum(axis=axis, keepdims=True)

    def back(g):
        gy = g * y
        gy -= y * gy.sum(axis=axis, keepdims=True)
        return (gy,)

    return Tensor.from_op("softmax", y, (x,), back)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join along ``axis``; every other extent must agree."""
    if not tensors:
        raise DimensionError("concat of an empty sequence")
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(a != b for i, (a, b) in enumerate(zip(ref, t.shape)) if i != ax):
            raise DimensionError(f"concat along axis {axis}: shapes {ref} and {t.shape} disagree off-axis")
    sizes = [t.shape[ax] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)
    return Tensor.from_op("concat", out, tuple(tensors), lambda g: tuple(np.split(g, cuts, axis=ax)))


def positional_encoding(length: int, d_model: int, dtype=np.float64) -> np.ndarray:
    """Sinusoidal table shaped ``[d_model, length]``.

    Row ``2i`` holds ``sin(t / 10000**(2i/d_model))`` and row ``2i+1`` the
    matching cosine.
    """
    if d_model % 2:
        raise ParameterError(f"positional encoding needs an even d_model, got {d_model}")
    t = np.arange(length, dtype=np.float64)[None, :]
    two_i = np.arange(0, d_model, 2, dtype=np.float64)[:, None]
    angle = t / np.power(10000.0, two_i / d_model)
    table = np.empty((d_model, length), dtype=np.float64)
    table[0::2] = np.sin(angle)
    table[1::2] = np.cos(angle)
    return table.astype(dtype)
