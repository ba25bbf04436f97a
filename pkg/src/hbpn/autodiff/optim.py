from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .tensor import Tensor

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    skipped: int = 0


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> bool:
    """One bias-corrected Adam update, in place on ``params``.

    Weight decay is the coupled L2 form: ``wd * theta`` is added to the
    gradient before the moment updates.  If any gradient is non-finite the
    update is skipped for every parameter, the step counter still advances
    and False is returned.
    """
    if state.lr <= 0:
        raise ValueError(f"learning rate must be positive, got {state.lr}")
    state.step += 1
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"adam: gradient for {name} has shape {g.shape}, parameter {params[name].shape}")
        if not np.isfinite(g).all():
            state.skipped += 1
            log.warning("adam step %d skipped: non-finite gradient for %s", state.step, name)
            return False

    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        p = params[name]
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        denom = np.sqrt(v / bc2)
        denom += state.eps
        p -= (state.lr / bc1) * m / denom
    return True


class Adam:
    """Adam over a fixed list of named parameter tensors."""

    def __init__(self, named_params: Iterable[tuple[str, Tensor]], lr=1e-4, beta1=0.9,
                 beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = dict(named_params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def step(self) -> bool:
        grads = {}
        for name, t in self.params.items():
            grads[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
        return adam_step({n: t.data for n, t in self.params.items()}, grads, self.state)
