"""Adam with linear learning-rate decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import NumericsError


@dataclass
class AdamState:
    base_lr: float
    total_steps: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr(self) -> float:
        """Linearly decayed rate for the upcoming step; 0 once the schedule
        is exhausted."""
        if self.total_steps <= 0:
            return self.base_lr
        return self.base_lr * max(0.0, 1.0 - self.step / self.total_steps)


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
) -> dict[str, np.ndarray]:
    """One update, in place. Missing gradients count as zero."""
    lr = state.lr()
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise NumericsError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name} shape {p.shape}"
            )
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
