"""Differentiable operators over :class:`Tensor`.

Only the operators the network actually uses are provided.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import conv as K
from .tensor import Tensor, get_dtype, make_result, unbroadcast


@dataclass(eq=False)
class ConvSpec:
    """Geometry and parameters of one convolution layer.

    Direct convolutions store ``weight`` as ``(out, in, k, k)``.  Transposed
    convolutions store it as ``(in, out, k, k)``, which is exactly the direct
    layout of the adjoint map, so :meth:`adjoint` can share the array.
    """

    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    transposed: bool = False
    weight: Tensor | None = None
    bias: Tensor | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError(
                f"conv {self.name or '?'}: need kernel>=1, stride>=1, padding>=0; "
                f"got k={self.kernel} s={self.stride} p={self.padding}"
            )
        wshape = self.weight_shape
        if self.weight is None:
            self.weight = Tensor(np.zeros(wshape), requires_grad=True)
        elif self.weight.shape != wshape:
            raise ValueError(f"conv {self.name or '?'}: weight shape {self.weight.shape} != {wshape}")
        if self.bias is None:
            self.bias = Tensor(np.zeros(self.out_channels), requires_grad=True)

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        k = self.kernel
        if self.transposed:
            return (self.in_channels, self.out_channels, k, k)
        return (self.out_channels, self.in_channels, k, k)

    @property
    def fan_in(self) -> int:
        return self.in_channels * self.kernel * self.kernel

    def out_size(self, size: int) -> int:
        if self.transposed:
            return K.conv_transpose_out_size(size, self.kernel, self.stride, self.padding)
        return K.conv_out_size(size, self.kernel, self.stride, self.padding)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [("weight", self.weight), ("bias", self.bias)]

    def adjoint(self) -> "ConvSpec":
        """Spec of the adjoint operator sharing this spec's weight (zero bias)."""
        return ConvSpec(
            self.out_channels, self.in_channels, self.kernel, self.stride, self.padding,
            transposed=not self.transposed, weight=self.weight,
            bias=Tensor(np.zeros(self.in_channels)),
        )


def _check_input(x: Tensor, spec: ConvSpec, op: str) -> None:
    if x.ndim != 4:
        raise ValueError(f"{op}: expected a 4-D (n, c, h, w) input, got shape {x.shape}")
    if x.shape[1] != spec.in_channels:
        raise ValueError(
            f"{op}: channel dimension mismatch, input has c={x.shape[1]} "
            f"but layer expects in_channels={spec.in_channels}"
        )


def conv2d(x: Tensor, spec: ConvSpec) -> Tensor:
    if spec.transposed:
        raise ValueError("conv2d: got a transposed ConvSpec; use conv_transpose2d")
    _check_input(x, spec, "conv2d")
    k, s, p = spec.kernel, spec.stride, spec.padding
    for axis, size in (("height", x.shape[2]), ("width", x.shape[3])):
        if size + 2 * p < k:
            raise ValueError(f"conv2d: input {axis} {size} too small for kernel {k} with padding {p}")
    w, b = spec.weight, spec.bias
    y, cols = K.conv2d_forward(x.data, w.data, b.data, s, p)
    x_shape = x.shape

    def backward(g):
        gx, gw, gb = K.conv2d_backward(g, x_shape, w.data, cols, s, p, need_x=x.requires_grad)
        return gx, gw, gb

    return make_result(y, (x, w, b), backward, "conv2d")


def conv_transpose2d(x: Tensor, spec: ConvSpec) -> Tensor:
    if not spec.transposed:
        raise ValueError("conv_transpose2d: got a direct ConvSpec; use conv2d")
    _check_input(x, spec, "conv_transpose2d")
    k, s, p = spec.kernel, spec.stride, spec.padding
    for axis, size in (("height", x.shape[2]), ("width", x.shape[3])):
        if K.conv_transpose_out_size(size, k, s, p) < 1:
            raise ValueError(f"conv_transpose2d: negative or zero output {axis} for input size {size}")
    w, b = spec.weight, spec.bias
    y, xmat = K.conv_transpose2d_forward(x.data, w.data, b.data, s, p)
    x_shape = x.shape

    def backward(g):
        return K.conv_transpose2d_backward(g, x_shape, w.data, xmat, s, p, need_x=x.requires_grad)

    return make_result(y, (x, w, b), backward, "conv_transpose2d")


def apply_conv(x: Tensor, spec: ConvSpec) -> Tensor:
    return conv_transpose2d(x, spec) if spec.transposed else conv2d(x, spec)


def prelu(x: Tensor, slopes: Tensor) -> Tensor:
    """Per-channel PReLU: ``x`` where x > 0, ``a*x`` elsewhere."""
    if x.ndim < 2 or slopes.shape != (x.shape[1],):
        raise ValueError(f"prelu: slopes shape {slopes.shape} does not match channels of {x.shape}")
    a = slopes.data.reshape((1, -1) + (1,) * (x.ndim - 2))
    pos = x.data > 0
    y = np.where(pos, x.data, a * x.data)

    def backward(g):
        gx = np.where(pos, g, a * g)
        ga = np.where(pos, 0, g * x.data)
        ga = ga.sum(axis=(0,) + tuple(range(2, x.ndim)))
        return gx, ga

    return make_result(y, (x, slopes), backward, "prelu")


def add(a: Tensor, b: Tensor) -> Tensor:
    y = a.data + b.data
    return make_result(y, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    y = a.data - b.data
    return make_result(y, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    y = a.data * b.data

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_result(y, (a, b), backward, "mul")


def softmax(x: Tensor, axis: int) -> Tensor:
    """Softmax along ``axis`` with max subtraction."""
    if not -x.ndim <= axis < x.ndim:
        raise ValueError(f"softmax: axis {axis} out of range for rank {x.ndim}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_result(y, (x,), backward, "softmax")


def concat(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    xs = list(xs)
    y = np.concatenate([t.data for t in xs], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in xs])[:-1]

    def backward(g):
        return [np.ascontiguousarray(part) for part in np.split(g, bounds, axis=axis)]

    return make_result(y, xs, backward, "concat")


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = list(xs)
    shapes = {t.shape for t in xs}
    if len(shapes) != 1:
        raise ValueError(f"stack: shape mismatch among inputs {sorted(shapes)}")
    y = np.stack([t.data for t in xs], axis=axis)

    def backward(g):
        return [np.ascontiguousarray(np.take(g, i, axis=axis)) for i in range(len(xs))]

    return make_result(y, xs, backward, "stack")


def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    y = x.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return make_result(np.asarray(y), (x,), backward, "sum")


def _check_pair(pred: Tensor, target: Tensor, op: str) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"{op}: shape mismatch, pred {pred.shape} vs target {target.shape}")


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    _check_pair(pred, target, "mse_loss")
    diff = pred.data - target.data
    n = diff.size
    # accumulate in float64 so the loss value does not depend on array size
    y = np.asarray(np.mean(np.square(diff, dtype=np.float64)), dtype=get_dtype())

    def backward(g):
        gd = (2.0 / n) * diff * g
        return gd, -gd

    return make_result(y, (pred, target), backward, "mse_loss")


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    _check_pair(pred, target, "l1_loss")
    diff = pred.data - target.data
    n = diff.size
    y = np.asarray(np.mean(np.abs(diff), dtype=np.float64), dtype=get_dtype())

    def backward(g):
        gd = np.sign(diff) * (g / n)
        return gd, -gd

    return make_result(y, (pred, target), backward, "l1_loss")
