from __future__ import annotations

import numpy as np

from .functional import ConvSpec
from .tensor import get_dtype


def he_init(spec: ConvSpec, rng_seed: int | np.random.Generator, gain: float = 2.0) -> ConvSpec:
    """Zero-mean Gaussian weights with variance ``gain / (in_channels * k * k)``; zero bias.

    ``gain=2`` is the rectifier case.  Layers with no activation after them
    preserve variance with ``gain=1``.  Modifies ``spec`` in place and
    returns it.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    std = np.sqrt(gain / spec.fan_in)
    w = rng.standard_normal(spec.weight_shape) * std
    spec.weight.data[...] = w.astype(get_dtype())
    spec.bias.data[...] = 0
    return spec
