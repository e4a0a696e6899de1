"""Adam optimizer and the stepped learning-rate schedule."""
from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .layers import Param


class AdamState:
    """First/second-moment accumulators keyed by parameter name."""

    def __init__(self, params: list[Param], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.value) for p in params}
        self.v = {p.name: np.zeros_like(p.value) for p in params}


def adam_step(params: list[Param], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update; clears gradients afterwards."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p in params:
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {p.name!r}")
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= (lr / bc1) * m / (np.sqrt(v / bc2) + state.eps)
        g[:] = 0


def lr_schedule(initial: float, epoch: int, drop_factor: float = 0.5) -> float:
    """Rate for a 1-based epoch index: drops by drop_factor every 5 epochs."""
    if epoch < 1:
        raise ValueError(f"epoch index is 1-based, got {epoch}")
    return initial * drop_factor ** ((epoch - 1) // 5)
