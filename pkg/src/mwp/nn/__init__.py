from . import ops
from .autograd import NonFiniteGradient, Parameter, ShapeMismatch, Tape, Tensor
from .gradcheck import GradCheckResult, gradient_check
from .layers import (
    EmptySequence,
    LSTMParams,
    ParameterSet,
    bilstm_encode,
    global_attention,
    lstm_cell,
    make_rng,
    run_lstm,
)
from .ops import InvalidProbability
from .optim import OptimizerState, clip_gradients, maybe_halve, sgd_epoch, sgd_step

__all__ = [
    "ops",
    "Tensor",
    "Parameter",
    "Tape",
    "ShapeMismatch",
    "NonFiniteGradient",
    "InvalidProbability",
    "EmptySequence",
    "ParameterSet",
    "LSTMParams",
    "lstm_cell",
    "run_lstm",
    "bilstm_encode",
    "global_attention",
    "make_rng",
    "OptimizerState",
    "maybe_halve",
    "clip_gradients",
    "sgd_step",
    "sgd_epoch",
    "gradient_check",
    "GradCheckResult",
]
