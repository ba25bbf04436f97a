"""Image I/O, bicubic resampling, colour conversion and dataset preparation."""

from .augment import augment_x8, inverse_augment, inverse_transform, transform
from .color import rgb_to_y
from .data import (
    crop_to,
    degrade,
    extract_patches,
    make_pair,
    make_synthetic_image,
    modcrop,
    pad_to_multiple,
    pre_upsample,
)
from .image import ImageRGB, SamplePair, quantize
from .io import ImageIOError, load_image, save_image
from .resize import bicubic_resize, cubic, imresize, weight_matrix

__all__ = [
    "ImageIOError", "ImageRGB", "SamplePair", "augment_x8", "bicubic_resize", "crop_to",
    "cubic", "degrade", "extract_patches", "imresize", "inverse_augment", "inverse_transform",
    "load_image", "make_pair", "make_synthetic_image", "modcrop", "pad_to_multiple",
    "pre_upsample", "quantize", "rgb_to_y", "save_image", "transform", "weight_matrix",
]
