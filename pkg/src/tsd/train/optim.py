"""AdamW with decoupled weight decay, and the step-decay schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tsd.autodiff.tensor import Parameter
from tsd.errors import UsageError


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adamw_step(
    params: list[Parameter],
    grads: list[np.ndarray | None],
    state: OptimizerState,
    lr: float,
    weight_decay: float = 0.0,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One in-place AdamW update.

    Decay is applied to the weights directly (``theta -= lr * wd * theta``),
    separately from the bias-corrected moment step.

    Raises:
        UsageError: a parameter has no gradient.
    """
    missing = [p.name for p, g in zip(params, grads) if g is None]
    if missing:
        raise UsageError(f"no gradient for parameter(s) {missing[:5]}; call backward() first")
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g in zip(params, grads):
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


class AdamW:
    """Stateful wrapper holding the parameter list and the moment buffers."""

    def __init__(self, params, lr: float = 1e-3, weight_decay: float = 0.0, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.state = OptimizerState()

    def step(self, lr: float | None = None) -> None:
        adamw_step(
            self.params,
            [p.grad for p in self.params],
            self.state,
            self.lr if lr is None else lr,
            self.weight_decay,
            self.betas,
            self.eps,
        )

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def lr_at(epoch: int, base_lr: float, gamma: float, step: int) -> float:
    """``base_lr * gamma ** floor(epoch / step)``."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return base_lr * math.pow(gamma, epoch // step)
