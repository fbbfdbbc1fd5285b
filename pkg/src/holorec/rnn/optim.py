"""Adam optimizer with bias correction and per-epoch learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Moment accumulators and schedule for one parameter set."""

    lr0: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.97      # per-epoch learning-rate factor
    step: int = 0
    lr: float = 0.0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr == 0.0:
            self.lr = self.lr0

    def set_epoch(self, epoch: int) -> None:
        self.lr = self.lr0 * self.decay ** epoch


def adam_init(params: dict, lr: float, decay: float = 0.97, **kw) -> AdamState:
    state = AdamState(lr0=lr, decay=decay, **kw)
    for name, value in params.items():
        state.m[name] = np.zeros_like(value)
        state.v[name] = np.zeros_like(value)
    return state


def adam_step(state: AdamState, grads: dict, params: dict) -> dict:
    """One bias-corrected update; returns the new parameter dict."""
    state.step += 1
    t = state.step
    out = {}
    for name in sorted(params):
        p = params[name]
        g = grads.get(name)
        if g is None:
            out[name] = p
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match "
                             f"parameter {name} {p.shape}")
        m = state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        out[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out
