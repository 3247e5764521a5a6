import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwp.nn import ops
from mwp.nn.autograd import NonFiniteGradient, Parameter, Tape, Tensor
from mwp.nn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from mwp.nn.gradcheck import gradient_check
from mwp.nn.layers import LSTMParams, ParameterSet, bilstm_encode, global_attention, lstm_cell, make_rng, run_lstm
from mwp.nn.optim import OptimizerState, clip_gradients, maybe_halve, sgd_epoch, sgd_step


def grad_of(loss_fn, *params):
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    return loss


# -- ops


def test_softmax_symmetric():
    np.testing.assert_array_equal(ops.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])


def test_softmax_is_stable_for_large_logits():
    out = ops.softmax(Tensor([1000.0, 1000.0, -1000.0])).data
    np.testing.assert_allclose(out, [0.5, 0.5, 0.0])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
def test_softmax_sums_to_one(xs):
    out = ops.softmax(Tensor(xs)).data
    assert np.all(out >= 0)
    assert abs(out.sum() - 1.0) < 1e-12


def test_cross_entropy_value():
    loss = ops.cross_entropy(Tensor([math.log(3.0), 0.0]), 0)
    assert loss.item() == pytest.approx(-math.log(0.75), abs=1e-6)
    assert loss.item() == pytest.approx(0.2877, abs=1e-4)


def test_cross_entropy_gradient_is_softmax_minus_onehot():
    w = Parameter(np.array([0.3, -1.2, 2.0]), "w")
    grad_of(lambda: ops.cross_entropy(w, 2), w)
    expected = np.exp(w.data) / np.exp(w.data).sum() - np.array([0, 0, 1])
    np.testing.assert_allclose(w.grad, expected, atol=1e-12)


def test_dropout():
    x = Tensor(np.arange(1.0, 101.0))
    rng = make_rng(0)
    np.testing.assert_array_equal(ops.dropout(x, 0.0, rng).data, x.data)
    np.testing.assert_array_equal(ops.dropout(x, 0.5, rng, train=False).data, x.data)
    out = ops.dropout(x, 0.5, rng).data
    kept = out != 0
    # inverted dropout rescales survivors
    np.testing.assert_allclose(out[kept], 2.0 * x.data[kept])
    assert 20 < kept.sum() < 80


def test_embedding_lookup_accumulates_repeated_rows():
    E = Parameter(np.arange(6.0).reshape(3, 2), "E")
    grad_of(lambda: ops.total(ops.embedding_lookup(E, [1, 1, 2])), E)
    np.testing.assert_array_equal(E.grad, [[0, 0], [2, 2], [1, 1]])


def test_broadcast_add_reduces_gradient():
    a = Parameter(np.ones((3, 2)), "a")
    b = Parameter(np.zeros(2), "b")
    grad_of(lambda: ops.total(ops.add(a, b)), a, b)
    np.testing.assert_array_equal(b.grad, [3.0, 3.0])


@pytest.mark.parametrize(
    "fn",
    [
        lambda a, b: ops.total(ops.tanh(ops.mul(a, b))),
        lambda a, b: ops.total(ops.sigmoid(ops.sub(a, b))),
        lambda a, b: ops.total(ops.square(ops.matmul(a, ops.transpose(b)))),
        lambda a, b: ops.total(ops.mul(ops.softmax(a, axis=1), b)),
        lambda a, b: ops.total(ops.mul(ops.log_softmax(a, axis=0), b)),
        lambda a, b: ops.total(ops.concat([ops.reshape(a, (-1,)), ops.index(b, 1)])),
        lambda a, b: ops.cross_entropy(ops.reshape(ops.stack([a[0], b[1]]), (-1,)), 3),
    ],
)
def test_op_gradients(fn):
    rng = make_rng(3)
    params = ParameterSet()
    a = params.uniform("a", (3, 2), rng, 1.0)
    b = params.uniform("b", (3, 2), rng, 1.0)
    assert gradient_check(params, lambda: fn(a, b)).max_relative_error < 1e-6


def test_linear_softmax_toy_model():
    rng = make_rng(0)
    params = ParameterSet()
    W = params.uniform("W", (4, 5), rng, 1.0)
    b = params.uniform("b", (4,), rng, 1.0)
    x = Tensor(rng.normal(size=5))
    result = gradient_check(params, lambda: ops.cross_entropy(ops.matmul(W, x) + b, 2))
    assert result.max_relative_error < 1e-6
    assert result.checked == 24


def test_gradients_accumulate_across_tapes():
    w = Parameter(np.array([2.0]), "w")
    for _ in range(2):
        with Tape() as tape:
            tape.backward(ops.total(ops.mul(w, w)))
    np.testing.assert_array_equal(w.grad, [8.0])


# -- LSTM


def lstm(H=3, E=2, seed=0, scale=0.5):
    params = ParameterSet()
    return params, LSTMParams.create(params, "l", E, H, make_rng(seed), scale)


def test_zero_weights_give_zero_state():
    params, p = lstm()
    for q in params:
        q.data[...] = 0.0
    # any input and previous output; the cell starts empty
    h, c = lstm_cell(Tensor([1.0, -2.0]), Tensor(np.ones(3)), Tensor(np.zeros(3)), p)
    np.testing.assert_array_equal(h.data, np.zeros(3))
    np.testing.assert_array_equal(c.data, np.zeros(3))


def test_saturated_forget_gate_copies_cell():
    params, p = lstm()
    for q in params:
        q.data[...] = 0.0
    p.b.data[3:6] = 50.0  # forget block
    c_prev = np.array([0.7, -1.3, 2.5])
    _, c = lstm_cell(Tensor([0.4, 0.9]), Tensor(np.zeros(3)), Tensor(c_prev), p)
    np.testing.assert_allclose(c.data, c_prev, atol=1e-9, rtol=0)


def test_run_lstm_matches_cell_loop():
    _, p = lstm()
    X = make_rng(1).normal(size=(4, 2))
    states, (h, c) = run_lstm(Tensor(X), p)
    h2, c2 = Tensor(np.zeros(3)), Tensor(np.zeros(3))
    for t in range(4):
        h2, c2 = lstm_cell(Tensor(X[t]), h2, c2, p)
        np.testing.assert_allclose(states[t].data, h2.data, atol=1e-14)
    np.testing.assert_allclose(c.data, c2.data, atol=1e-14)


def test_bilstm_single_step():
    _, f = lstm(seed=1)
    _, b = lstm(seed=2)
    H, h_n = bilstm_encode(Tensor([[0.3, -0.2]]), f, b)
    assert H.shape == (1, 6)
    np.testing.assert_array_equal(H.data[0], h_n.data)


def test_bilstm_palindrome_mirror():
    _, f = lstm(seed=1)
    _, b = lstm(seed=1)  # tied directional weights
    rows = make_rng(5).normal(size=(3, 2))
    X = np.vstack([rows, rows[1::-1]])  # r0 r1 r2 r1 r0
    H, _ = bilstm_encode(Tensor(X), f, b)
    fwd, bwd = H.data[:, :3], H.data[:, 3:]
    np.testing.assert_allclose(fwd, bwd[::-1], atol=1e-14)


def test_bilstm_embedding_gradient():
    rng = make_rng(0)
    params = ParameterSet()
    E = params.uniform("E", (6, 4), rng, 0.5)
    f = LSTMParams.create(params, "f", 4, 3, rng, 0.5)
    b = LSTMParams.create(params, "b", 4, 3, rng, 0.5)
    W = params.uniform("W", (2, 6), rng, 0.5)
    ids = [0, 3, 3, 5, 1, 2]

    def loss():
        _, h_n = bilstm_encode(ops.embedding_lookup(E, ids), f, b)
        return ops.cross_entropy(ops.matmul(W, h_n), 1)

    result = gradient_check(params, loss)
    assert result.per_parameter["E"] < 1e-4
    assert result.max_relative_error < 1e-4


def test_attention_weights():
    W = Parameter(np.eye(2), "W")
    _, w = global_attention(Tensor([0.3, 0.1]), Tensor([[1.0, 2.0]]), W)
    np.testing.assert_array_equal(w.data, [1.0])
    W.data[...] = 0.0
    ctx, w = global_attention(Tensor([0.3, 0.1]), Tensor(make_rng(0).normal(size=(4, 2))), W)
    np.testing.assert_allclose(w.data, [0.25] * 4)


# -- optimisation


def test_single_sgd_step():
    params = ParameterSet()
    w = params.add("w", np.array([1.0]))
    w.grad = np.array([0.5])
    sgd_step(params, lr=1.0)
    np.testing.assert_array_equal(w.data, [0.5])


def test_halving_trace():
    state = OptimizerState(learning_rate=1.0, initial_lr=1.0)
    rates = []
    for ppl in [10, 9, 9.5]:
        maybe_halve(state, ppl)
        rates.append(state.learning_rate)
    assert rates == [1.0, 1.0, 0.5]
    assert state.halvings == [3]


def test_equal_perplexity_counts_as_no_decrease():
    state = OptimizerState()
    maybe_halve(state, 5.0)
    maybe_halve(state, 5.0)
    assert state.learning_rate == 0.5


def test_clipping():
    params = ParameterSet()
    w = params.add("w", np.zeros(2))
    w.grad = np.array([30.0, 40.0])  # norm 50
    norm = clip_gradients(params, 5.0)
    assert norm == 50.0
    np.testing.assert_allclose(w.grad, [3.0, 4.0])
    w.grad = np.array([0.3, 0.4])
    clip_gradients(params, 5.0)
    np.testing.assert_allclose(w.grad, [0.3, 0.4])


def test_non_finite_gradient_is_reported():
    params = ParameterSet()
    w = params.add("w", np.zeros(2))
    w.grad = np.array([np.nan, 1.0])
    with pytest.raises(NonFiniteGradient):
        sgd_step(params, 1.0)


def test_sgd_epoch_reduces_a_quadratic():
    params = ParameterSet()
    w = params.add("w", np.array([3.0]))
    state = OptimizerState(learning_rate=0.1)
    loss = lambda target: ops.total(ops.square(ops.sub(w, Tensor([target]))))
    first = sgd_epoch(params, [[0.0, 0.0]] * 20, state, loss)
    second = sgd_epoch(params, [[0.0, 0.0]] * 20, state, loss)
    assert second < first
    assert abs(w.data[0]) < 1e-3


def test_seeded_init_is_deterministic():
    a = lstm(seed=7)[0].state()
    b = lstm(seed=7)[0].state()
    c = lstm(seed=8)[0].state()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not all(np.array_equal(a[k], c[k]) for k in a)
    assert all(np.all(np.abs(v) <= 0.5) for v in a.values())


# -- checkpoints


def test_checkpoint_round_trip(tmp_path):
    params, _ = lstm()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, "toy", {"hidden": 3}, {"source": ["<unk>", "a"]}, params.state(), {"note": 1})
    ckpt = load_checkpoint(path)
    assert ckpt.kind == "toy" and ckpt.hyperparameters == {"hidden": 3} and ckpt.extra == {"note": 1}
    for k, v in params.state().items():
        assert np.array_equal(ckpt.params[k], v)
    first = path.read_bytes()
    save_checkpoint(path, "toy", {"hidden": 3}, {"source": ["<unk>", "a"]}, params.state(), {"note": 1})
    assert path.read_bytes() == first
    assert [p.name for p in tmp_path.iterdir()] == ["m.ckpt"]  # no temp files left behind


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a zip")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_load_state_checks_shapes():
    params, _ = lstm()
    state = params.state()
    state["l.b"] = np.zeros(5)
    with pytest.raises(ValueError):
        params.load_state(state)


@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_lstm_gradients_property(T, H, seed):
    rng = make_rng(seed)
    params = ParameterSet()
    p = LSTMParams.create(params, "l", 2, H, rng, 0.5)
    X = Tensor(rng.normal(size=(T, 2)))
    result = gradient_check(params, lambda: ops.total(ops.stack(run_lstm(X, p)[0])))
    assert result.max_relative_error < 1e-4
