"""Hourglass modules, the stacked network and its two reconstruction heads."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ConvSpec, Tensor, conv2d
from .blocks import BackProjectionBlock, Direction
from .nn import ConvPReLU, Module, make_conv


class HeadKind(str, enum.Enum):
    WR = "WR"
    PLAIN = "Plain"


@dataclass(frozen=True)
class ModelConfig:
    modules: int = 3
    depth: int = 3
    base_channels: int = 64
    head_kind: str = "WR"
    seed: int = 0

    def __post_init__(self):
        if self.modules < 1:
            raise ValueError(f"need at least one hourglass module, got {self.modules}")
        if self.depth < 1:
            raise ValueError(f"hourglass depth must be >= 1, got {self.depth}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        object.__setattr__(self, "head_kind", HeadKind(self.head_kind).value)

    @property
    def multiple(self) -> int:
        """Spatial sizes must be divisible by this."""
        return 2 ** self.depth

    def to_dict(self) -> dict:
        return asdict(self)


class HourGlassModule(Module):
    """T down blocks, T up blocks, 1x1 same-scale shortcuts, two 3x3 output heads.

    Channels double at every down block (c -> 2^T c at the bottleneck) and
    halve at every up block.  The i-th up block's output is summed with a
    1x1 projection of the down-path feature map of the same scale (the
    module input for the last one).
    """

    def __init__(self, depth: int, channels: int, rng):
        self.depth = depth
        self.channels = channels
        self.dbp = [BackProjectionBlock(Direction.DBP, channels * 2 ** i, rng) for i in range(depth)]
        self.ubp = [BackProjectionBlock(Direction.UBP, channels * 2 ** (depth - i), rng) for i in range(depth)]
        self.local = [make_conv(channels * 2 ** (depth - 1 - i), channels * 2 ** (depth - 1 - i), 1, rng=rng)
                      for i in range(depth)]
        self.coarse_head = make_conv(channels, 3, 3, 1, 1, rng=rng)
        self.weight_head = make_conv(channels, 3, 3, 1, 1, rng=rng)

    @property
    def last_activation(self) -> ConvPReLU:
        return self.ubp[-1].second

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(f"hourglass: expected (n, {self.channels}, h, w) input, got {x.shape}")
        m = 2 ** self.depth
        if x.shape[2] % m or x.shape[3] % m:
            raise ValueError(f"hourglass: spatial size {x.shape[2]}x{x.shape[3]} not divisible by {m}; pad first")
        if min(x.shape[2:]) < 2 * m:
            raise ValueError(f"hourglass: spatial size {x.shape[2]}x{x.shape[3]} below the minimum {2 * m} "
                             f"for depth {self.depth}")
        feats = [x]
        for block in self.dbp:
            feats.append(block(feats[-1]))
        h = feats[-1]
        for i, block in enumerate(self.ubp):
            h = block(h) + conv2d(feats[self.depth - 1 - i], self.local[i])
        return h, conv2d(h, self.coarse_head), conv2d(h, self.weight_head)

    def bottleneck_shape(self, n: int, height: int, width: int) -> tuple[int, int, int, int]:
        m = 2 ** self.depth
        return (n, self.channels * m, height // m, width // m)


def count_parameters(config: ModelConfig) -> int:
    """Closed-form parameter count of :class:`HBPNModel` for ``config``."""
    c, t, k = config.base_channels, config.depth, config.modules
    conv = lambda cin, cout, ks: cin * cout * ks * ks + cout  # noqa: E731
    module = sum(BackProjectionBlock.count_parameters("DBP", c * 2 ** i) for i in range(t))
    module += sum(BackProjectionBlock.count_parameters("UBP", c * 2 ** (t - i)) for i in range(t))
    module += sum(conv(c * 2 ** i, c * 2 ** i, 1) for i in range(t))
    module += 2 * conv(c, 3, 3)
    total = conv(3, c, 3) + c + k * module + (k - 1) * conv(c, c, 1)
    if config.head_kind == HeadKind.PLAIN.value:
        total += conv(3 * k, 3, 3)
    return total


def hg_forward(features: Tensor, module: HourGlassModule):
    return module(features)


class HBPNModel(Module):
    def __init__(self, config: ModelConfig | None = None, **overrides):
        config = config or ModelConfig(**overrides)
        self.config = config
        rng = np.random.default_rng(config.seed)
        c = config.base_channels
        self.feature_head = ConvPReLU(3, c, up=False, rng=rng, kernel=3, stride=1, padding=1)
        self.hg = [HourGlassModule(config.depth, c, rng) for _ in range(config.modules)]
        self.shortcut = [make_conv(c, c, 1, rng=rng) for _ in range(config.modules - 1)]
        if config.head_kind == HeadKind.PLAIN.value:
            self.plain_head = make_conv(3 * config.modules, 3, 3, 1, 1, rng=rng)

    @property
    def head_kind(self) -> str:
        return self.config.head_kind

    def __call__(self, x: Tensor):
        return hbpn_forward(x, self)

    def set_capture(self, enabled: bool) -> None:
        for module in self.hg:
            module.last_activation.capture = enabled
            if not enabled:
                module.last_activation.last_preact = None


def hbpn_forward(input_image: Tensor, model: HBPNModel):
    """Return ``(sr, coarse_list, weight_list)`` for a pre-upsampled input batch."""
    x = input_image
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"hbpn: expected an (n, 3, h, w) image batch, got {x.shape}")
    m = model.config.multiple
    if x.shape[2] % m or x.shape[3] % m:
        raise ValueError(f"hbpn: image size {x.shape[2]}x{x.shape[3]} not divisible by {m}; pad first")
    feats = model.feature_head(x)
    coarse, weights = [], []
    for k, module in enumerate(model.hg):
        out, c_k, w_k = module(feats)
        coarse.append(c_k)
        weights.append(w_k)
        if k + 1 < len(model.hg):
            feats = out + conv2d(feats, model.shortcut[k])
    if model.head_kind == HeadKind.WR.value:
        sr = wr_reconstruct(coarse, weights)
    else:
        sr = plain_reconstruct(coarse, model.plain_head)
    return sr, coarse, weights


def wr_probabilities(weight_list) -> Tensor:
    """Softmax across modules: (K, n, 3, h, w) per-pixel, per-channel probabilities."""
    if not weight_list:
        raise ValueError("wr: need at least one weight map")
    return ad.softmax(ad.stack(weight_list, axis=0), axis=0)


def wr_reconstruct(coarse_list, weight_list) -> Tensor:
    if len(coarse_list) != len(weight_list) or not coarse_list:
        raise ValueError(f"wr: {len(coarse_list)} coarse images vs {len(weight_list)} weight maps")
    shapes = {t.shape for t in coarse_list} | {t.shape for t in weight_list}
    if len(shapes) != 1:
        raise ValueError(f"wr: coarse images and weight maps differ in shape: {sorted(shapes)}")
    probs = wr_probabilities(weight_list)
    return ad.sum(probs * ad.stack(coarse_list, axis=0), axis=0)


def plain_reconstruct(coarse_list, head: ConvSpec) -> Tensor:
    if head.in_channels != 3 * len(coarse_list) or head.out_channels != 3:
        raise ValueError(
            f"plain head expects {head.in_channels} -> {head.out_channels} channels, "
            f"got {len(coarse_list)} coarse images"
        )
    shapes = {t.shape for t in coarse_list}
    if len(shapes) != 1:
        raise ValueError(f"plain head: coarse images differ in shape: {sorted(shapes)}")
    return conv2d(ad.concat(coarse_list, axis=1), head)


def positive_percentage(values: np.ndarray) -> float:
    values = np.asarray(values)
    return 100.0 * np.count_nonzero(values > 0) / values.size


def activation_percentage(model: HBPNModel, input_image: Tensor) -> list[float]:
    """Share of strictly positive inputs to each module's last PReLU, in percent."""
    model.set_capture(True)
    try:
        with ad.no_grad():
            model(input_image)
        return [positive_percentage(m.last_activation.last_preact) for m in model.hg]
    finally:
        model.set_capture(False)
