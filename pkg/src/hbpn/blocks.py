"""Up- and down-sampling back-projection blocks and the fixed-operator refiner."""

from __future__ import annotations

import enum
import logging

import numpy as np

from .autodiff import Tensor, conv2d
from .imaging.resize import imresize
from .nn import ConvPReLU, Module, make_conv

log = logging.getLogger(__name__)


class Direction(str, enum.Enum):
    UBP = "UBP"
    DBP = "DBP"


class BackProjectionBlock(Module):
    """Learned 2x back-projection unit.

    For an up block (UBP) with main up-sampler ``D``, mirror down-sampler
    ``C`` and second up-sampler ``D2``::

        out = omega(D x) + D2(lam(x) - C(D x))

    The down block (DBP) swaps the roles of up- and down-samplers.  Every
    6x6 sampler is followed by its own PReLU; ``lam`` and ``omega`` are
    linear 1x1 convolutions.  ``omega`` and the second sampler change the
    channel count (halve for UBP, double for DBP).
    """

    def __init__(self, direction: Direction | str, in_channels: int, rng):
        direction = Direction(direction)
        if direction is Direction.UBP:
            if in_channels % 2:
                raise ValueError(f"UBP needs an even channel count, got {in_channels}")
            out_channels = in_channels // 2
        else:
            out_channels = in_channels * 2
        up = direction is Direction.UBP
        c = in_channels
        self.direction = direction
        self.in_channels = c
        self.out_channels = out_channels
        self.main = ConvPReLU(c, c, up=up, rng=rng)
        self.mirror = ConvPReLU(c, c, up=not up, rng=rng)
        self.second = ConvPReLU(c, out_channels, up=up, rng=rng)
        self.lam = make_conv(c, c, 1, rng=rng)
        self.omega = make_conv(c, out_channels, 1, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        self._check(x)
        sampled = self.main(x)
        residual = conv2d(x, self.lam) - self.mirror(sampled)
        return conv2d(sampled, self.omega) + self.second(residual)

    def _check(self, x: Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"{self.direction.value}: expected (n, {self.in_channels}, h, w) input, got {x.shape}"
            )
        h, w = x.shape[2:]
        if self.direction is Direction.DBP:
            if h % 2 or w % 2:
                raise ValueError(f"DBP: spatial size must be even, got {h}x{w}")
            if h < 4 or w < 4:
                raise ValueError(f"DBP: spatial size must be at least 4x4, got {h}x{w}")
        elif h < 2 or w < 2:
            raise ValueError(f"UBP: spatial size must be at least 2x2, got {h}x{w}")

    @staticmethod
    def count_parameters(direction: Direction | str, in_channels: int, kernel: int = 6) -> int:
        """Closed-form parameter count (weights, biases, PReLU slopes)."""
        c = in_channels
        o = c // 2 if Direction(direction) is Direction.UBP else 2 * c
        k2 = kernel * kernel
        samplers = 2 * (c * c * k2 + 2 * c) + (c * o * k2 + 2 * o)
        return samplers + (c * c + c) + (c * o + o)


def ubp_forward(x: Tensor, block: BackProjectionBlock) -> Tensor:
    if block.direction is not Direction.UBP:
        raise ValueError("ubp_forward: block is not a UBP block")
    return block(x)


def dbp_forward(x: Tensor, block: BackProjectionBlock) -> Tensor:
    if block.direction is not Direction.DBP:
        raise ValueError("dbp_forward: block is not a DBP block")
    return block(x)


def classical_back_projection(sr: np.ndarray, lr: np.ndarray, scale: int, lam: float = 0.5,
                              iterations: int = 10) -> tuple[np.ndarray, list[float]]:
    """Iteratively refine ``sr`` so that its bicubic down-scale matches ``lr``.

    ``Y <- Y - lam * up(down(Y) - X)`` with bicubic ``down``/``up``.  Arrays
    are (c, h, w) or (h, w).  Returns the refined image and the L2 residual
    ``||down(Y_t) - X||`` for t = 0..iterations.
    """
    sr = np.asarray(sr)
    lr = np.asarray(lr)
    if sr.shape[:-2] != lr.shape[:-2] or sr.shape[-2] != scale * lr.shape[-2] \
            or sr.shape[-1] != scale * lr.shape[-1]:
        raise ValueError(f"back projection: SR {sr.shape} is not {scale}x of LR {lr.shape}")
    if not 0 < lam <= 1:
        raise ValueError(f"back projection: lambda must lie in (0, 1], got {lam}")
    if iterations < 0:
        raise ValueError("back projection: iterations must be >= 0")

    hr_size = sr.shape[-2:]
    lr_size = lr.shape[-2:]
    y = sr.copy()
    work = y.astype(np.float64)
    residuals = []
    for t in range(iterations + 1):
        diff = imresize(work, lr_size) - lr
        residuals.append(float(np.sqrt(np.sum(diff * diff))))
        if t == iterations:
            break
        if not diff.any():
            residuals.extend([0.0] * (iterations - t))
            break
        work = work - lam * imresize(diff, hr_size)
        log.debug("back projection iteration %d residual %.6g", t, residuals[-1])
    if iterations == 0:
        return y, residuals
    return work.astype(sr.dtype), residuals
