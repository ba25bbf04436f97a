"""Minimal reverse-mode autodiff over 4-D arrays, with Adam and He init."""

from .functional import (
    ConvSpec,
    add,
    apply_conv,
    concat,
    conv2d,
    conv_transpose2d,
    l1_loss,
    mse_loss,
    mul,
    prelu,
    softmax,
    stack,
    sum,
    sub,
)
from .init import he_init
from .optim import Adam, AdamState, adam_step
from .runtime import deterministic
from .tensor import NonFiniteError, Tensor, get_dtype, no_grad, precision

__all__ = [
    "Adam", "AdamState", "ConvSpec", "NonFiniteError", "Tensor", "adam_step", "add",
    "apply_conv", "concat", "conv2d", "conv_transpose2d", "deterministic", "get_dtype",
    "he_init", "l1_loss", "mse_loss", "mul", "no_grad", "precision", "prelu", "softmax",
    "stack", "sub", "sum",
]
