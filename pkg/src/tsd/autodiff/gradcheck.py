"""Central-difference gradient oracle.

Independent of the tape: it only calls ``fn`` forward on perturbed copies.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from tsd.autodiff.tensor import Parameter, Tensor, no_grad


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def numerical_gradient(fn: Callable[[], Tensor], target: Tensor, eps: float = 1e-5) -> np.ndarray:
    """d fn() / d target by central differences, mutating ``target`` in place."""
    flat = target.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = fn().item()
            flat[i] = orig - eps
            lo = fn().item()
            flat[i] = orig
            grad[i] = (hi - lo) / (2.0 * eps)
    return grad.reshape(target.shape)


def grad_check(fn: Callable[[Tensor], Tensor], point: Tensor | np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central differences at ``point``.

    The error per coordinate is ``|analytic - numeric| / max(1, |numeric|)``.
    ``fn`` must map a tensor to a scalar tensor. Run it in float64 with
    dropout disabled.
    """
    data = point.data if isinstance(point, Tensor) else np.asarray(point, dtype=np.float64)
    x = Tensor(np.array(data, dtype=np.float64), requires_grad=True)
    fn(x).backward()
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
    numeric = numerical_gradient(lambda: fn(x), x, eps)
    return _relative_error(analytic, numeric)


def grad_check_parameters(loss_fn: Callable[[], Tensor], params: Iterable[Parameter], eps: float = 1e-5) -> dict[str, float]:
    """Per-parameter relative error for a closure over fixed parameters."""
    params = list(params)
    for p in params:
        p.zero_grad()
    loss_fn().backward()
    errors = {}
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numerical_gradient(loss_fn, p, eps)
        errors[p.name] = _relative_error(analytic, numeric)
    return errors
