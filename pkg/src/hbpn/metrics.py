"""Y-channel PSNR / SSIM with border cropping, and geometric self-ensemble."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Tensor, no_grad
from .imaging import ImageRGB, crop_to, inverse_transform, pad_to_multiple, rgb_to_y, transform

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
DYNAMIC_RANGE = 255.0


def shave(plane: np.ndarray, s: int) -> np.ndarray:
    h, w = plane.shape
    if h <= 2 * s or w <= 2 * s:
        raise ValueError(f"image {h}x{w} too small to crop {s} border pixels")
    return plane[s:h - s, s:w - s] if s else plane


def _y_pair(a: ImageRGB, b: ImageRGB, crop_s: int) -> tuple[np.ndarray, np.ndarray]:
    if a.shape != b.shape:
        raise ValueError(f"metric inputs differ in size: {a.shape} vs {b.shape}")
    return shave(rgb_to_y(a), crop_s), shave(rgb_to_y(b), crop_s)


def psnr_y(a: ImageRGB, b: ImageRGB, crop_s: int) -> float:
    ya, yb = _y_pair(a, b, crop_s)
    mse = float(np.mean((ya - yb) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(DYNAMIC_RANGE ** 2 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 1-D Gaussian taps; the 2-D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    k = len(taps)
    rows = np.lib.stride_tricks.sliding_window_view(plane, k, axis=0) @ taps
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ taps


def ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    """Mean single-scale SSIM over all valid 11x11 Gaussian windows."""
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"plane {x.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    taps = gaussian_window()
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    mu_x, mu_y = _filter_valid(x, taps), _filter_valid(y, taps)
    sxx = _filter_valid(x * x, taps) - mu_x * mu_x
    syy = _filter_valid(y * y, taps) - mu_y * mu_y
    sxy = _filter_valid(x * y, taps) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim_y(a: ImageRGB, b: ImageRGB, crop_s: int) -> float:
    ya, yb = _y_pair(a, b, crop_s)
    return ssim_plane(ya, yb)


@dataclass
class MetricsReport:
    scale: int
    crop: int
    names: list[str] = field(default_factory=list)
    psnr: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)

    def add(self, name: str, psnr: float, ssim: float) -> None:
        self.names.append(name)
        self.psnr.append(psnr)
        self.ssim.append(ssim)

    @property
    def mean_psnr(self) -> float:
        return math.fsum(self.psnr) / len(self.psnr) if self.psnr else float("nan")

    @property
    def mean_ssim(self) -> float:
        return math.fsum(self.ssim) / len(self.ssim) if self.ssim else float("nan")

    def to_text(self) -> str:
        width = max([len(n) for n in self.names] + [5])
        lines = [f"{'image':<{width}}  {'PSNR':>7}  {'SSIM':>6}", "-" * (width + 17)]
        for name, p, s in zip(self.names, self.psnr, self.ssim):
            lines.append(f"{name:<{width}}  {p:7.2f}  {s:6.4f}")
        lines.append("-" * (width + 17))
        lines.append(f"{'mean':<{width}}  {self.mean_psnr:7.2f}  {self.mean_ssim:6.4f}")
        lines.append(f"scale x{self.scale}, crop {self.crop} px, Y channel")
        return "\n".join(lines)

    def write(self, text_path, records_path) -> None:
        with open(text_path, "w", encoding="utf-8") as f:
            f.write(self.to_text() + "\n")
        with open(records_path, "w", encoding="utf-8") as f:
            for name, p, s in zip(self.names, self.psnr, self.ssim):
                f.write(json.dumps({"name": name, "psnr": p, "ssim": s}) + "\n")


ModelFn = Callable[[np.ndarray], np.ndarray]


def as_model_fn(model) -> ModelFn:
    """Wrap a network (or any array -> array callable) as an (n,3,h,w) array map."""
    from .network import HBPNModel

    if isinstance(model, HBPNModel):
        def run(arr):
            with no_grad():
                sr, _, _ = model(Tensor(arr))
            return sr.data
        return run
    return model


def _pad_multiple(model) -> int:
    config = getattr(model, "config", None)
    return config.multiple if config is not None else 1


def single_infer(model, image: ImageRGB) -> ImageRGB:
    """Pad, run once, crop back.  Output is clamped to [0, 1]."""
    fn = as_model_fn(model)
    padded, dims = pad_to_multiple(image.data, _pad_multiple(model))
    out = fn(padded[None])[0]
    return ImageRGB(crop_to(out, dims))


def self_ensemble_infer(model, image: ImageRGB) -> ImageRGB:
    """Average the inverse-transformed outputs over all 8 rotations/flips."""
    fn = as_model_fn(model)
    padded, dims = pad_to_multiple(image.data, _pad_multiple(model))
    acc = np.zeros(padded.shape, dtype=np.float64)
    for idx in range(8):
        out = fn(transform(padded, idx)[None])[0]
        acc += inverse_transform(out, idx)
    return ImageRGB(crop_to(acc / 8.0, dims))
