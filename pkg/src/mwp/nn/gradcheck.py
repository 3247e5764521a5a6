"""Central-difference gradient verification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autograd import Tape
from .layers import ParameterSet

EPSILON = 1e-5


def relative_error(a, n):
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


@dataclass
class GradCheckResult:
    max_relative_error: float
    per_parameter: dict[str, float] = field(default_factory=dict)
    checked: int = 0

    def passed(self, tol=1e-4) -> bool:
        return self.max_relative_error < tol


def gradient_check(
    params: ParameterSet,
    loss_fn: Callable,
    rng: np.random.Generator | None = None,
    max_per_param: int | None = None,
    eps: float = EPSILON,
) -> GradCheckResult:
    """Compare tape gradients of ``loss_fn()`` with central differences.

    Every element is checked unless ``max_per_param`` is set, in which case a
    random subsample of that many elements (at least 200) per parameter is used.
    ``loss_fn`` must be deterministic.
    """
    params.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
        if not np.isfinite(loss.item()):
            raise ValueError("loss is not finite at the sample")
        tape.backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}

    result = GradCheckResult(0.0)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idxs = np.arange(flat.size)
        if max_per_param is not None and flat.size > max(max_per_param, 200):
            rng = rng or np.random.default_rng(0)
            idxs = rng.choice(flat.size, size=max(max_per_param, 200), replace=False)
        worst = 0.0
        a_flat = analytic[name].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn().item()
            flat[i] = orig - eps
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            worst = max(worst, relative_error(a_flat[i], numeric))
            result.checked += 1
        result.per_parameter[name] = worst
        result.max_relative_error = max(result.max_relative_error, worst)
    return result
