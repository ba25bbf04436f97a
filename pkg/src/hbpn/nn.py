"""Parameter containers shared by the blocks and the network."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .autodiff import ConvSpec, Tensor, apply_conv, he_init, prelu


class Module:
    """Base class whose parameters are discovered from attributes in assignment order.

    Children may be :class:`Module`, :class:`ConvSpec`, parameter
    :class:`Tensor` objects, or lists of modules.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for attr, value in vars(self).items():
            yield from _walk(value, f"{prefix}{attr}")

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.grad = None


def _walk(value, name: str) -> Iterator[tuple[str, Tensor]]:
    if isinstance(value, Module):
        yield from value.named_parameters(name + ".")
    elif isinstance(value, ConvSpec):
        for pname, t in value.parameters():
            yield f"{name}.{pname}", t
    elif isinstance(value, Tensor) and value.requires_grad:
        yield name, value
    elif isinstance(value, list):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}")


def make_conv(cin, cout, k, s=1, p=0, rng=None, transposed=False, gain=1.0) -> ConvSpec:
    """Build a conv layer; He-initialised when ``rng`` is given.

    The default gain of 1 suits linear layers; pass 2 when a PReLU follows.
    """
    spec = ConvSpec(cin, cout, k, s, p, transposed=transposed)
    if rng is not None:
        he_init(spec, rng, gain=gain)
    return spec


class ConvPReLU(Module):
    """Convolution (direct or transposed) followed by per-channel PReLU.

    Defaults give the 6x6 / stride 2 / pad 2 samplers of the back-projection
    blocks.
    """

    def __init__(self, cin: int, cout: int, up: bool, rng, kernel=6, stride=2, padding=2,
                 slope_init: float = 0.25):
        self.conv = make_conv(cin, cout, kernel, stride, padding, rng, transposed=up, gain=2.0)
        self.slope = Tensor(np.full(cout, slope_init), requires_grad=True)
        self.last_preact: np.ndarray | None = None
        self.capture = False

    def __call__(self, x: Tensor) -> Tensor:
        pre = apply_conv(x, self.conv)
        if self.capture:
            self.last_preact = pre.data.copy()
        return prelu(pre, self.slope)
