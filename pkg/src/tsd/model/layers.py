"""Parameter containers wrapping the functional primitives."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from tsd.autodiff import functional as F
from tsd.autodiff.tensor import Parameter, Tensor


class Module:
    """Collects :class:`Parameter` attributes in declaration order."""

    def named_parameters(self) -> Iterator[tuple[str, Parameter]]:
        for value in vars(self).values():
            if isinstance(value, Parameter):
                yield value.name, value
            elif isinstance(value, Module):
                yield from value.named_parameters()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.named_parameters()

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv1d(Module):
    def __init__(self, name: str, c_in: int, c_out: int, kernel: int, rng, dtype=np.float64, stride: int = 1, padding: int = 0):
        self.stride = stride
        self.padding = padding
        self.weight = Parameter(_uniform(rng, (c_out, c_in, kernel), c_in * kernel, dtype), f"{name}.weight")
        self.bias = Parameter(np.zeros(c_out, dtype=dtype), f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose1d(Module):
    def __init__(self, name: str, c_in: int, c_out: int, kernel: int, rng, dtype=np.float64, stride: int = 1, padding: int = 0):
        self.stride = stride
        self.padding = padding
        self.weight = Parameter(_uniform(rng, (c_in, c_out, kernel), c_in * kernel, dtype), f"{name}.weight")
        self.bias = Parameter(np.zeros(c_out, dtype=dtype), f"{name}.bias")

    def __call__(self, x: Tensor, output_padding: int = 0) -> Tensor:
        return F.conv_transpose1d(x, self.weight, self.bias, self.stride, self.padding, output_padding)


class Linear(Module):
    def __init__(self, name: str, d_in: int, d_out: int, rng, dtype=np.float64, weight: str = "weight", bias: str = "bias"):
        self.weight = Parameter(_uniform(rng, (d_out, d_in), d_in, dtype), f"{name}.{weight}")
        self.bias = Parameter(np.zeros(d_out, dtype=dtype), f"{name}.{bias}")

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, name: str, dim: int, dtype=np.float64, eps: float = 1e-5):
        self.eps = eps
        self.gain = Parameter(np.ones(dim, dtype=dtype), f"{name}.gain")
        self.shift = Parameter(np.zeros(dim, dtype=dtype), f"{name}.shift")

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.shift, self.eps)
