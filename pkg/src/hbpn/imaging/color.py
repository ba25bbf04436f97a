from __future__ import annotations

import numpy as np

from .image import ImageRGB

# BT.601 studio swing, inputs in [0, 1], output on the 8-bit scale
_Y_COEFFS = np.array([65.481, 128.553, 24.966])


def rgb_to_y(img: ImageRGB | np.ndarray) -> np.ndarray:
    """Luma plane in [16, 235] as float64."""
    rgb = img.data if isinstance(img, ImageRGB) else np.asarray(img)
    return 16.0 + np.tensordot(_Y_COEFFS, rgb.astype(np.float64), axes=(0, 0))
