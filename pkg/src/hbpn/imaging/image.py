from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ImageRGB:
    """Three float32 planes in [0, 1], stored as a (3, h, w) array."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data)
        if arr.ndim == 2:
            arr = np.repeat(arr[None], 3, axis=0)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ValueError(f"ImageRGB needs a (3, h, w) array, got shape {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError(f"ImageRGB needs height and width >= 1, got {arr.shape[1:]}")
        if arr.dtype == np.uint8:
            arr = arr.astype(np.float32) / 255.0
        self.data = np.ascontiguousarray(np.clip(arr, 0.0, 1.0), dtype=np.float32)

    @classmethod
    def from_bytes(cls, planes: np.ndarray) -> "ImageRGB":
        return cls(np.asarray(planes, dtype=np.uint8))

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    def to_bytes(self) -> np.ndarray:
        """Quantise to uint8, rounding half away from zero."""
        return quantize(self.data)

    def quantized(self) -> "ImageRGB":
        return ImageRGB(self.to_bytes())

    def crop(self, h: int, w: int, top: int = 0, left: int = 0) -> "ImageRGB":
        return ImageRGB(self.data[:, top:top + h, left:left + w])

    def __eq__(self, other) -> bool:
        return isinstance(other, ImageRGB) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"ImageRGB({self.height}x{self.width})"


def quantize(values: np.ndarray) -> np.ndarray:
    scaled = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0
    # values are non-negative, so floor(x + 0.5) rounds half away from zero
    return np.floor(scaled + 0.5).astype(np.uint8)


@dataclass
class SamplePair:
    """Bicubic pre-upsampled LR (``input``) and its HR ``target``, same size."""

    input: ImageRGB
    target: ImageRGB
    scale: int

    def __post_init__(self):
        if self.input.shape != self.target.shape:
            raise ValueError(f"SamplePair: input {self.input.shape} != target {self.target.shape}")
        if self.scale not in (2, 4, 8):
            raise ValueError(f"SamplePair: scale must be 2, 4 or 8, got {self.scale}")
