"""Plain SGD with global-norm clipping and the halve-on-stall learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .autograd import NonFiniteGradient, Tape
from .layers import ParameterSet

CLIP_NORM = 5.0


@dataclass
class OptimizerState:
    learning_rate: float = 1.0
    initial_lr: float = 1.0
    last_val_perplexity: float = math.inf
    best_val_perplexity: float = math.inf
    halvings: list[int] = field(default_factory=list)
    epoch: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def maybe_halve(state: OptimizerState, val_perplexity: float) -> OptimizerState:
    """Close an epoch: halve the rate if validation perplexity did not drop
    below the previous epoch's value."""
    state.epoch += 1
    if val_perplexity >= state.last_val_perplexity:
        state.learning_rate /= 2.0
        state.halvings.append(state.epoch)
    state.last_val_perplexity = val_perplexity
    state.best_val_perplexity = min(state.best_val_perplexity, val_perplexity)
    return state


def clip_gradients(params: ParameterSet, max_norm: float = CLIP_NORM) -> float:
    """Rescale all gradients so their joint L2 norm is at most max_norm. Returns the pre-clip norm."""
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradient(p.name)
    norm = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            p.grad = p.grad * scale
    return norm


def sgd_step(params: ParameterSet, lr: float, max_norm: float | None = CLIP_NORM) -> float:
    norm = clip_gradients(params, max_norm)
    for p in params:
        p.data = p.data - lr * p.grad
    return norm


def sgd_epoch(
    params: ParameterSet,
    batches: Iterable[Sequence],
    state: OptimizerState,
    loss_fn: Callable,
    max_norm: float | None = CLIP_NORM,
) -> float:
    """One pass; each batch's mean loss is backpropagated and applied as one update.

    Returns the mean per-example loss over the epoch.
    """
    total, count = 0.0, 0
    for batch in batches:
        params.zero_grad()
        for example in batch:
            with Tape() as tape:
                loss = loss_fn(example)
                tape.backward(loss, scale=1.0 / len(batch))
            total += loss.item()
            count += 1
        sgd_step(params, state.learning_rate, max_norm)
    return total / max(count, 1)
