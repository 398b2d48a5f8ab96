"""Adam with decoupled (multiplicative) weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..objective import TrainingError


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def arrays(self) -> dict:
        out = {"step": np.array(self.step)}
        for k in sorted(self.m):
            out[f"m/{k}"] = self.m[k]
            out[f"v/{k}"] = self.v[k]
        return out


def adam_step(params: dict, grads: dict, state: AdamState, lr: float, weight_decay: float = 0.0) -> AdamState:
    """Update ``params`` (name -> Tensor) in place from ``grads`` (name -> array or None).

    ``p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)``; a missing gradient counts as zero.
    """
    if lr <= 0 or weight_decay < 0:
        raise ValueError("lr must be positive and weight_decay non-negative")
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    shrink = 1.0 - lr * weight_decay
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        update = (lr / c1) * m / (np.sqrt(v / c2) + state.eps)
        if shrink != 1.0:
            p.data *= shrink
        p.data -= update.astype(p.data.dtype, copy=False)
    return state
