"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .autograd import Param
from .errors import NonFiniteGradient


class AdamState:
    """First/second moment buffers plus step counter for a parameter list."""

    def __init__(self, params: list[Param], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]


def adam_step(state: AdamState, params: list[Param] | None = None) -> list[Param]:
    """One Adam update from the accumulated gradients.

    Raises
    ------
    NonFiniteGradient
        If any gradient contains NaN or infinity; parameters are left
        untouched in that case.
    """
    if params is None:
        params = state.params
    if len(params) != len(state.params) or any(a is not b for a, b in zip(params, state.params)):
        raise ValueError("params do not match the optimizer state")
    for p in params:
        if not np.isfinite(p.grad).all():
            raise NonFiniteGradient(f"non-finite gradient in {p.name or 'param'}")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


def zero_grads(params: list[Param]) -> None:
    for p in params:
        p.zero_grad()
