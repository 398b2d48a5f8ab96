"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_input: list = field(default_factory=list)
    tol: float = 1e-4
    checked: int = 0

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.tol)


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    eps: float = 1e-3,
    tol: float = 1e-4,
    seed: int = 0,
    max_elements: int | None = None,
    floor: float = 1e-7,
) -> GradCheckReport:
    """Compare backward() against central differences for ``fn(*inputs)``.

    Non-scalar outputs are reduced with a fixed random projection so every
    output element contributes. Relative error per element is
    ``|a - n| / max(|a|, |n|, floor)``. ``max_elements`` caps how many
    coordinates of each input are probed (sampled with ``seed``).
    """
    rng = np.random.default_rng(seed)
    arrays = [np.array(x, dtype=np.float64) for x in inputs]

    with no_grad():
        probe = fn(*[Tensor(a) for a in arrays])
    weights = rng.standard_normal(probe.shape) if probe.data.size > 1 else np.ones(probe.shape)

    def scalar(out: Tensor) -> float:
        return float(np.sum(out.data * weights))

    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    out = fn(*leaves)
    backward((out * Tensor(weights)).sum())
    analytic = [np.zeros_like(a) if t.grad is None else np.asarray(t.grad, dtype=np.float64) for a, t in zip(arrays, leaves)]

    per_input = []
    checked = 0
    for i, base in enumerate(arrays):
        flat_idx = np.arange(base.size)
        if max_elements is not None and base.size > max_elements:
            flat_idx = np.sort(rng.choice(base.size, size=max_elements, replace=False))
        worst = 0.0
        for fi in flat_idx:
            pos = np.unravel_index(fi, base.shape)
            saved = base[pos]
            with no_grad():
                base[pos] = saved + eps
                up = scalar(fn(*[Tensor(a) for a in arrays]))
                base[pos] = saved - eps
                down = scalar(fn(*[Tensor(a) for a in arrays]))
            base[pos] = saved
            num = (up - down) / (2 * eps)
            ana = analytic[i][pos]
            rel = abs(ana - num) / max(abs(ana), abs(num), floor)
            worst = max(worst, rel)
            checked += 1
        per_input.append(worst)
    return GradCheckReport(max(per_input) if per_input else 0.0, per_input, tol, checked)
