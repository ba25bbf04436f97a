"""The eight rotations/flips of the square, acting on the last two axes.

Index ``k`` means: rotate by ``(k % 4) * 90`` degrees counter-clockwise,
then flip left-right when ``k >= 4``.
"""

from __future__ import annotations

import numpy as np

from .image import ImageRGB

NUM_TRANSFORMS = 8


def _check(idx: int) -> None:
    if not isinstance(idx, (int, np.integer)) or not 0 <= idx < NUM_TRANSFORMS:
        raise ValueError(f"augmentation index must be an integer in 0..7, got {idx!r}")


def transform(arr: np.ndarray, idx: int) -> np.ndarray:
    _check(idx)
    out = np.rot90(arr, idx % 4, axes=(-2, -1))
    if idx >= 4:
        out = out[..., ::-1]
    return np.ascontiguousarray(out)


def inverse_transform(arr: np.ndarray, idx: int) -> np.ndarray:
    _check(idx)
    out = arr[..., ::-1] if idx >= 4 else arr
    return np.ascontiguousarray(np.rot90(out, -(idx % 4), axes=(-2, -1)))


def augment_x8(img: ImageRGB) -> list[ImageRGB]:
    return [ImageRGB(transform(img.data, k)) for k in range(NUM_TRANSFORMS)]


def inverse_augment(idx: int, img: ImageRGB) -> ImageRGB:
    return ImageRGB(inverse_transform(img.data, idx))
