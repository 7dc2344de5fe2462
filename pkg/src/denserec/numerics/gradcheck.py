"""Central finite-difference gradient oracle."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def finite_difference_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
    max_coords: int | None = 40,
    seed: int = 0,
    floor: float = 1e-6,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``f`` must be deterministic and rebuild its graph on every call. Up to
    ``max_coords`` coordinates per parameter are sampled (all if None).
    The relative error denominator is ``max(|analytic|, |numeric|, floor)``.
    """
    for p in params:
        p.grad = None
    loss = f()
    backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if max_coords is None or n <= max_coords else rng.choice(n, max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            fp = float(f().data)
            flat[c] = orig - step
            fm = float(f().data)
            flat[c] = orig
            num = (fp - fm) / (2 * step)
            ana = float(ga.reshape(-1)[c])
            denom = max(abs(ana), abs(num), floor)
            worst = max(worst, abs(ana - num) / denom)
    for p in params:
        p.grad = None
    return worst
