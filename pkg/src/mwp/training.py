"""Epoch loop shared by the neural solvers: SGD, halve-on-stall schedule,
checkpoint selection by validation solution accuracy."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from .nn.layers import ParameterSet
from .nn.optim import OptimizerState, maybe_halve, sgd_epoch

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    learning_rate: float
    train_loss: float
    val_loss: float
    val_perplexity: float
    val_accuracy: float
    train_accuracy: float | None = None
    train_perplexity: float | None = None


@dataclass
class TrainingLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    halvings: list[int] = field(default_factory=list)

    def to_dict(self):
        return {
            "best_epoch": self.best_epoch,
            "halvings": list(self.halvings),
            "epochs": [
                {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(r).items()}
                for r in self.epochs
            ],
        }

    def first_epoch_reaching(self, key: str, value: float) -> int | None:
        for r in self.epochs:
            got = getattr(r, key)
            if got is not None and got >= value:
                return r.epoch
        return None


def _finite(x: float) -> float:
    return x if math.isfinite(x) else math.inf


def make_batches(n: int, batch_size: int, rng) -> list[list[int]]:
    order = rng.permutation(n)
    return [list(order[i : i + batch_size]) for i in range(0, n, batch_size)]


def train_loop(
    params: ParameterSet,
    examples: Sequence,
    loss_fn: Callable,
    evaluate: Callable[[], dict],
    epochs: int,
    batch_size: int,
    lr: float,
    clip_norm: float,
    rng,
    train_metrics: Callable[[], dict] | None = None,
) -> TrainingLog:
    """``evaluate()`` returns val_loss, val_perplexity, val_accuracy for the current parameters;
    the optional ``train_metrics()`` may add train_accuracy / train_perplexity.

    After the last epoch the parameters are reset to the epoch with the best
    validation accuracy; ties go to the lower validation perplexity, then the earlier epoch.
    """
    state = OptimizerState(learning_rate=lr, initial_lr=lr)
    history = TrainingLog()
    best_key, best_state = None, None
    for epoch in range(1, epochs + 1):
        lr_used = state.learning_rate
        batches = [[examples[i] for i in b] for b in make_batches(len(examples), batch_size, rng)]
        train_loss = sgd_epoch(params, batches, state, loss_fn, clip_norm)
        ev = evaluate()
        record = EpochRecord(
            epoch,
            lr_used,
            train_loss,
            ev["val_loss"],
            ev["val_perplexity"],
            ev["val_accuracy"],
            **(train_metrics() if train_metrics is not None else {}),
        )
        history.epochs.append(record)
        maybe_halve(state, ev["val_perplexity"])
        key = (record.val_accuracy, -_finite(record.val_perplexity))
        if best_key is None or key > best_key:
            best_key, best_state = key, params.state()
            history.best_epoch = epoch
        log.info(
            "epoch %d lr %.4g train loss %.4f val ppl %.4f val acc %.4f",
            epoch, lr_used, train_loss, record.val_perplexity, record.val_accuracy,
        )
    history.halvings = list(state.halvings)
    if best_state is not None:
        params.load_state(best_state)
    return history
