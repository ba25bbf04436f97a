"""Finite-difference gradient checking and small shared fixtures for the tests."""

from __future__ import annotations

import numpy as np

from hbpn.autodiff import Tensor
from hbpn.autodiff import functional as F


def project(out: Tensor, seed: int = 99) -> Tensor:
    """Reduce any output to a scalar through a fixed random projection."""
    r = np.random.default_rng(seed).standard_normal(out.shape)
    return F.sum(out * Tensor(r))


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Normwise relative error; exact zeros on both sides count as agreement."""
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def numeric_grad(f, t: Tensor, h: float = 1e-6, indices=None) -> np.ndarray:
    """Central differences of the scalar ``f()`` with respect to entries of ``t``."""
    flat = t.data.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    grad = np.zeros(flat.size)
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        plus = f().item()
        flat[i] = old - h
        minus = f().item()
        flat[i] = old
        grad[i] = (plus - minus) / (2 * h)
    return grad


def gradcheck(f, tensors, h: float = 1e-6, max_entries: int | None = None, seed: int = 0) -> float:
    """Largest relative error between backprop and finite differences over ``tensors``.

    ``f`` rebuilds the graph and returns a scalar.  Must run under float64.
    With ``max_entries`` only a random subset of each tensor is probed.
    """
    for t in tensors:
        t.grad = None
    f().backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in tensors:
        analytic = t.grad.reshape(-1).copy()
        idx = None
        if max_entries is not None and t.size > max_entries:
            idx = np.sort(rng.choice(t.size, max_entries, replace=False))
        numeric = numeric_grad(f, t, h, idx)
        if idx is not None:
            analytic, numeric = analytic[idx], numeric[idx]
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def param_tensors(module) -> list[Tensor]:
    return [t for _, t in module.named_parameters()]
