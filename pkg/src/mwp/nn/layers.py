"""Parameter containers, LSTM cells, bidirectional encoding and attention."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .autograd import Parameter, ShapeMismatch, Tensor

INIT_SCALE = 0.08


class EmptySequence(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the algorithm is published and stable across numpy versions."""
    return np.random.Generator(np.random.PCG64(seed))


class ParameterSet:
    """Ordered, uniquely named parameters of one model."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, data) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Parameter(np.array(data, dtype=np.float64), name)
        self._params[name] = p
        return p

    def uniform(self, name, shape, rng, scale=INIT_SCALE) -> Parameter:
        return self.add(name, rng.uniform(-scale, scale, size=shape))

    def __getitem__(self, name) -> Parameter:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self):
        return list(self._params)

    def zero_grad(self):
        for p in self:
            p.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ValueError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in self._params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise ShapeMismatch(f"{name}: stored {value.shape}, model {p.data.shape}")
            p.data = value.copy()

    def count(self) -> int:
        return sum(p.data.size for p in self)


@dataclass
class LSTMParams:
    """One LSTM direction. Gate blocks are stacked in order input, forget, output, candidate."""

    W_x: Parameter  # (4H, E)
    W_h: Parameter  # (4H, H)
    b: Parameter  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[1]

    @classmethod
    def create(cls, params: ParameterSet, prefix: str, input_size: int, hidden_size: int, rng, scale=INIT_SCALE):
        return cls(
            params.uniform(f"{prefix}.W_x", (4 * hidden_size, input_size), rng, scale),
            params.uniform(f"{prefix}.W_h", (4 * hidden_size, hidden_size), rng, scale),
            params.uniform(f"{prefix}.b", (4 * hidden_size,), rng, scale),
        )


def _gates(z, c_prev, H):
    i = ops.sigmoid(z[0:H])
    f = ops.sigmoid(z[H : 2 * H])
    o = ops.sigmoid(z[2 * H : 3 * H])
    g = ops.tanh(z[3 * H : 4 * H])
    c = f * c_prev + i * g
    h = o * ops.tanh(c)
    return h, c


def lstm_cell(x_t, h_prev, c_prev, params: LSTMParams):
    """One step: c = f*c_prev + i*g, h = o*tanh(c)."""
    H = params.hidden_size
    if h_prev.shape != (H,) or c_prev.shape != (H,):
        raise ShapeMismatch(f"state shape {h_prev.shape}/{c_prev.shape}, hidden size {H}")
    if x_t.shape != (params.W_x.shape[1],):
        raise ShapeMismatch(f"input shape {x_t.shape}, expected ({params.W_x.shape[1]},)")
    z = ops.matmul(params.W_x, x_t) + ops.matmul(params.W_h, h_prev) + params.b
    return _gates(z, c_prev, H)


def zeros(n) -> Tensor:
    return Tensor(np.zeros(n))


def run_lstm(X: Tensor, params: LSTMParams, reverse=False, h0=None, c0=None):
    """Run over the rows of X (T, E). Returns per-step hidden states in input order
    and the final (h, c)."""
    T = X.shape[0]
    if T == 0:
        raise EmptySequence("cannot encode an empty sequence")
    if X.shape[1] != params.W_x.shape[1]:
        raise ShapeMismatch(f"input width {X.shape[1]}, expected {params.W_x.shape[1]}")
    H = params.hidden_size
    # input projections for every step at once
    zx = ops.matmul(X, ops.transpose(params.W_x)) + params.b
    h = h0 if h0 is not None else zeros(H)
    c = c0 if c0 is not None else zeros(H)
    states = [None] * T
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        z = zx[t] + ops.matmul(params.W_h, h)
        h, c = _gates(z, c, H)
        states[t] = h
    return states, (h, c)


def bilstm_encode(X: Tensor, forward: LSTMParams, backward: LSTMParams):
    """Returns H (T, 2H) of per-step [fwd; bwd] states and h_n = [fwd last; bwd last]."""
    fwd, (h_f, _) = run_lstm(X, forward)
    bwd, (h_b, _) = run_lstm(X, backward, reverse=True)
    H = ops.stack([ops.concat([f, b]) for f, b in zip(fwd, bwd)])
    return H, ops.concat([h_f, h_b])


def global_attention(h_t: Tensor, S: Tensor, W_a: Parameter):
    """Bilinear ("general") attention over source states S (T, H_enc).

    score_i = h_t^T W_a s_i; W_a has shape (H_dec, H_enc).
    """
    scores = ops.matmul(S, ops.matmul(h_t, W_a))
    weights = ops.softmax(scores)
    context = ops.matmul(weights, S)
    return context, weights
