"""Adam with bias correction; no weight decay."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import NumericalError
from .tensor import Parameter


def adam_step(p: Parameter, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Parameter:
    """Update ``p`` in place from ``p.grad`` and clear the gradient."""
    g = p.grad_or_zeros()
    if not np.all(np.isfinite(g)):
        bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
        raise NumericalError(f"non-finite gradient in parameter {p.name!r}: {bad} of {g.size} entries")
    p.step_count += 1
    t = p.step_count
    dt = p.data.dtype.type
    p.m *= dt(beta1)
    p.m += dt(1 - beta1) * g
    p.v *= dt(beta2)
    p.v += dt(1 - beta2) * (g * g)
    m_hat = p.m / dt(1 - beta1**t)
    v_hat = p.v / dt(1 - beta2**t)
    p.data -= dt(lr) * m_hat / (np.sqrt(v_hat) + dt(eps))
    p.grad = None
    return p


class Adam:
    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, clip_norm: float | None = None):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.clip_norm = clip_norm

    def grad_norm(self) -> float:
        total = 0.0
        for p in self.params:
            if p.grad is not None:
                total += float(np.sum(p.grad.astype(np.float64) ** 2))
        return float(np.sqrt(total))

    def step(self) -> float:
        """Apply one update to every parameter; returns the pre-clip gradient norm."""
        norm = self.grad_norm()
        if self.clip_norm is not None and np.isfinite(norm) and norm > self.clip_norm:
            factor = self.clip_norm / (norm + 1e-12)
            for p in self.params:
                if p.grad is not None:
                    p.grad *= p.data.dtype.type(factor)
        for p in self.params:
            adam_step(p, self.lr, self.beta1, self.beta2, self.eps)
        return norm

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
