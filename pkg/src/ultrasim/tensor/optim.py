"""Adam optimizer with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NonFiniteError, Tensor


@dataclass
class AdamState:
    """First/second moment buffers per parameter plus the shared step count."""

    lr: float = 0.0002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], lr: float = 0.0002,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState):
    """One Adam update in place. Missing grads (None) leave the param alone."""
    if len(params) != len(state.m):
        raise ValueError("AdamState was built for a different parameter list")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"gradient for parameter {i} is not finite")
        m = state.m[i]
        v = state.v[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class Adam:
    """Convenience wrapper binding an AdamState to a parameter list."""

    def __init__(self, params: list[Tensor], lr: float = 0.0002,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state)
