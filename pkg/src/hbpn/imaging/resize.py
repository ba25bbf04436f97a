"""MATLAB ``imresize``-compatible bicubic resampling.

Each axis is resized by a dense (out, in) weight matrix built like MATLAB's
``contributions``: cubic kernel with a = -0.5, kernel stretched by 1/scale
when shrinking, mirror-symmetric boundary indices, rows normalised to 1.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .image import ImageRGB


def cubic(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x <= 2, far, 0.0))


@functools.lru_cache(maxsize=128)
def weight_matrix(in_len: int, out_len: int, antialias: bool = True) -> np.ndarray:
    """Return the (out_len, in_len) resampling matrix for one axis."""
    if in_len < 1 or out_len < 1:
        raise ValueError(f"resize: lengths must be >= 1, got {in_len} -> {out_len}")
    scale = out_len / in_len
    width = 4.0
    if scale < 1 and antialias:
        width /= scale

        def kernel(t):
            return scale * cubic(scale * t)
    else:
        kernel = cubic

    x = np.arange(1, out_len + 1, dtype=np.float64)
    u = x / scale + 0.5 * (1 - 1 / scale)
    left = np.floor(u - width / 2)
    taps = int(math.ceil(width)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]
    w = kernel(u[:, None] - idx)
    w /= w.sum(axis=1, keepdims=True)

    # symmetric extension: 1..n, n..1, repeated
    period = 2 * in_len
    m = np.mod(idx.astype(np.int64) - 1, period)
    src = np.where(m < in_len, m, period - 1 - m)

    mat = np.zeros((out_len, in_len))
    rows = np.repeat(np.arange(out_len), taps)
    np.add.at(mat, (rows, src.ravel()), w.ravel())
    mat.setflags(write=False)
    return mat


def imresize(arr: np.ndarray, size: tuple[int, int], antialias: bool = True) -> np.ndarray:
    """Resize the last two axes of ``arr`` to ``size``; float64 result, no clamping."""
    arr = np.asarray(arr, dtype=np.float64)
    in_h, in_w = arr.shape[-2:]
    out_h, out_w = size
    sh, sw = out_h / in_h, out_w / in_w
    # MATLAB resizes the axis with the smaller scale first
    if sw < sh:
        arr = _resize_axis(arr, -1, out_w, antialias)
        return _resize_axis(arr, -2, out_h, antialias)
    arr = _resize_axis(arr, -2, out_h, antialias)
    return _resize_axis(arr, -1, out_w, antialias)


def _resize_axis(arr: np.ndarray, axis: int, out_len: int, antialias: bool) -> np.ndarray:
    in_len = arr.shape[axis]
    if in_len == out_len:
        return arr
    mat = weight_matrix(in_len, out_len, antialias)
    moved = np.moveaxis(arr, axis, -1)
    return np.moveaxis(moved @ mat.T, -1, axis)


def bicubic_resize(img: ImageRGB, out_h: int, out_w: int) -> ImageRGB:
    """Resize an :class:`ImageRGB`; the result is clamped to [0, 1]."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bicubic_resize: output size must be >= 1, got {out_h}x{out_w}")
    return ImageRGB(imresize(img.data, (out_h, out_w)))
