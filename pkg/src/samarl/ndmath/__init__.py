"""Minimal tensor math: reverse-mode gradients, Adam, clipping, grad checks."""

from .tensor import (
    DEFAULT_DTYPE,
    ShapeError,
    Tensor,
    add,
    backward,
    concat,
    grad_enabled,
    layer_norm,
    leaky_relu,
    matmul,
    minimum,
    mul,
    neg,
    no_grad,
    reshape,
    select,
    softmax,
    stack,
    sub,
    swapaxes,
    tanh,
    tmean,
    tsum,
)
from .optim import Adam, NonFiniteGradError, clip_grad_norm
from .gradcheck import GradientCheckError, gradient_check

__all__ = [
    "DEFAULT_DTYPE",
    "Adam",
    "GradientCheckError",
    "NonFiniteGradError",
    "ShapeError",
    "Tensor",
    "add",
    "backward",
    "clip_grad_norm",
    "concat",
    "grad_enabled",
    "gradient_check",
    "layer_norm",
    "leaky_relu",
    "matmul",
    "minimum",
    "mul",
    "neg",
    "no_grad",
    "reshape",
    "select",
    "softmax",
    "stack",
    "sub",
    "swapaxes",
    "tanh",
    "tmean",
    "tsum",
]
