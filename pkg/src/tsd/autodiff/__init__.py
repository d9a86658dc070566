"""Minimal reverse-mode autodiff used by the TSD model."""

from tsd.autodiff.functional import (
    avg_pool1d,
    concat,
    conv1d,
    conv_transpose1d,
    dropout,
    layer_norm,
    linear,
    max_pool1d,
    positional_encoding,
    relu,
    softmax,
)
from tsd.autodiff.gradcheck import grad_check, grad_check_parameters, numerical_gradient
from tsd.autodiff.tensor import Node, Parameter, Tensor, backward, is_grad_enabled, no_grad, tape

__all__ = [
    "Node",
    "Parameter",
    "Tensor",
    "avg_pool1d",
    "backward",
    "concat",
    "conv1d",
    "conv_transpose1d",
    "dropout",
    "grad_check",
    "grad_check_parameters",
    "is_grad_enabled",
    "layer_norm",
    "linear",
    "max_pool1d",
    "no_grad",
    "numerical_gradient",
    "positional_encoding",
    "relu",
    "softmax",
    "tape",
]
