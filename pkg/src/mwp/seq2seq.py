"""LSTM encoder-decoder with bilinear global attention that writes templates token by token."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import Seq2SeqConfig
from .nn import ops
from .nn.autograd import Tensor
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import EmptySequence, LSTMParams, ParameterSet, global_attention, make_rng, run_lstm
from .outcome import FailureReason, SolveOutcome, failed_outcome, solve_with_template
from .text import AbstractedProblem
from .training import TrainingLog, train_loop
from .vocab import EOS, SOS, UNK, Vocab


@dataclass
class DecodeState:
    h: Tensor
    c: Tensor
    emitted: list[str] = field(default_factory=list)
    attention: list[np.ndarray] = field(default_factory=list)


@dataclass
class DecodeResult:
    tokens: list[str]
    terminated: bool
    attention: list[np.ndarray]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def template_tokens(canonical: str) -> list[str]:
    return canonical.split(" ")


class Seq2SeqModel:
    kind = "seq2seq"

    def __init__(self, source_vocab: Vocab, target_vocab: Vocab, config: Seq2SeqConfig, rng=None):
        self.source_vocab = source_vocab
        self.target_vocab = target_vocab
        self.config = c = config
        rng = rng if rng is not None else make_rng(config.seed)
        s = c.init_scale
        self.params = p = ParameterSet()
        self.src_embedding = p.uniform("src.embedding", (len(source_vocab), c.embed_dim), rng, s)
        self.encoder = LSTMParams.create(p, "encoder", c.embed_dim, c.hidden_dim, rng, s)
        self.tgt_embedding = p.uniform("tgt.embedding", (len(target_vocab), c.embed_dim), rng, s)
        self.decoder = LSTMParams.create(p, "decoder", c.embed_dim, c.hidden_dim, rng, s)
        self.W_a = p.uniform("attn.W_a", (c.hidden_dim, c.hidden_dim), rng, s)
        self.W_c = p.uniform("attn.W_c", (c.hidden_dim, 2 * c.hidden_dim), rng, s)
        self.W_out = p.uniform("out.W", (len(target_vocab), c.hidden_dim), rng, s)
        self.b_out = p.uniform("out.b", (len(target_vocab),), rng, s)

    def _dropout(self, x, train, rng):
        if not train or self.config.dropout == 0.0:
            return x
        return ops.dropout(x, self.config.dropout, rng, train=True)

    def encode_source(self, tokens: Sequence[str], train=False, rng=None):
        """One encoder state per source token, plus the final (h, c) to seed the decoder."""
        if not tokens:
            raise EmptySequence("problem has no tokens")
        X = ops.embedding_lookup(self.src_embedding, self.source_vocab.encode(tokens))
        states, final = run_lstm(X, self.encoder)
        S = self._dropout(ops.stack(states), train, rng)
        return S, final

    def initial_state(self, final) -> DecodeState:
        return DecodeState(final[0], final[1])

    def decode_step(self, state: DecodeState, prev_token: str, S: Tensor, train=False, rng=None):
        """Returns (logits, attention weights, next state)."""
        x = ops.embedding_lookup(self.tgt_embedding, self.target_vocab.id(prev_token))
        states, (h, c) = run_lstm(ops.reshape(x, (1, -1)), self.decoder, h0=state.h, c0=state.c)
        context, weights = global_attention(h, S, self.W_a)
        attentional = ops.tanh(ops.matmul(self.W_c, ops.concat([context, h])))
        attentional = self._dropout(attentional, train, rng)
        logits = ops.matmul(self.W_out, attentional) + self.b_out
        nxt = DecodeState(h, c, state.emitted + [prev_token], state.attention + [weights.data])
        return logits, weights, nxt

    def step_losses(self, source: Sequence[str], target: Sequence[str], train=False, rng=None) -> list[Tensor]:
        """Teacher-forced cross-entropy at each target position (EOS included)."""
        S, final = self.encode_source(source, train, rng)
        state = self.initial_state(final)
        prev = SOS
        losses = []
        for tok in list(target) + [EOS]:
            logits, _, state = self.decode_step(state, prev, S, train, rng)
            losses.append(ops.cross_entropy(logits, self.target_vocab.id(tok)))
            prev = tok
        return losses

    def loss(self, source, target, train=False, rng=None) -> Tensor:
        losses = self.step_losses(source, target, train, rng)
        total = losses[0]
        for l in losses[1:]:
            total = total + l
        return total

    def greedy_decode(self, source: Sequence[str], max_len: int | None = None) -> DecodeResult:
        max_len = max_len or self.config.max_decode_len
        S, final = self.encode_source(source)
        state = self.initial_state(final)
        prev = SOS
        out = []
        for _ in range(max_len):
            logits, _, state = self.decode_step(state, prev, S)
            tok = self.target_vocab.tokens[int(np.argmax(logits.data))]
            if tok == EOS:
                return DecodeResult(out, True, state.attention)
            out.append(tok)
            prev = tok
        return DecodeResult(out, False, state.attention)

    def save(self, path, extra=None):
        save_checkpoint(
            path,
            self.kind,
            vars(self.config).copy(),
            {"source": self.source_vocab.tokens, "target": self.target_vocab.tokens},
            self.params.state(),
            {"attention": "general", **(extra or {})},
        )


def encode_source(model: Seq2SeqModel, tokens) -> np.ndarray:
    return model.encode_source(tokens)[0].data


def decode_step(model: Seq2SeqModel, state: DecodeState, prev_token: str, encoder_states: Tensor):
    """Next-token distribution and updated state (inference mode)."""
    logits, _, nxt = model.decode_step(state, prev_token, encoder_states)
    return ops.softmax(logits).data, nxt


def greedy_decode(model: Seq2SeqModel, source, max_len=None) -> DecodeResult:
    return model.greedy_decode(source, max_len)


def generate_and_solve(model: Seq2SeqModel, problem: AbstractedProblem) -> SolveOutcome:
    result = model.greedy_decode(problem.tokens)
    if not result.terminated:
        return failed_outcome(problem, result.text or None, FailureReason.NON_TERMINATED)
    if UNK in result.tokens or any(t in (SOS, EOS) for t in result.tokens):
        return failed_outcome(problem, result.text or None, FailureReason.UNPARSEABLE)
    return solve_with_template(problem, result.text)


def evaluate_seq2seq(model: Seq2SeqModel, problems: Sequence[AbstractedProblem]) -> dict:
    total_ce, n_tokens, correct = 0.0, 0, 0
    for p in problems:
        if p.template is not None:
            losses = model.step_losses(p.tokens, template_tokens(p.template.canonical))
            total_ce += sum(l.item() for l in losses)
            n_tokens += len(losses)
        correct += generate_and_solve(model, p).correct
    val_loss = total_ce / n_tokens if n_tokens else math.inf
    return {
        "val_loss": val_loss,
        "val_perplexity": math.exp(val_loss) if math.isfinite(val_loss) else math.inf,
        "val_accuracy": correct / len(problems) if problems else 0.0,
    }


def perplexity(model: Seq2SeqModel, problems: Sequence[AbstractedProblem]) -> float:
    return evaluate_seq2seq(model, problems)["val_perplexity"]


def train_metrics(model: Seq2SeqModel, problems) -> dict:
    ev = evaluate_seq2seq(model, problems)
    return {"train_perplexity": ev["val_perplexity"], "train_accuracy": ev["val_accuracy"]}


def build_vocabs(train: Sequence[AbstractedProblem], config: Seq2SeqConfig) -> tuple[Vocab, Vocab]:
    source = Vocab.build([p.tokens for p in train], min_freq=config.unk_min_freq)
    target = Vocab.build(
        [template_tokens(p.template.canonical) for p in train if p.template is not None],
        min_freq=1,
        specials=(UNK, SOS, EOS),
    )
    return source, target


def train_seq2seq(
    train: Sequence[AbstractedProblem],
    validation: Sequence[AbstractedProblem],
    config: Seq2SeqConfig | None = None,
    track_train_metrics: bool = False,
) -> tuple[Seq2SeqModel, TrainingLog]:
    config = config or Seq2SeqConfig()
    if not train or not validation:
        raise ValueError("training and validation splits must be non-empty")
    rng = make_rng(config.seed)
    source, target = build_vocabs(train, config)
    model = Seq2SeqModel(source, target, config, rng)
    examples = [(p.tokens, template_tokens(p.template.canonical)) for p in train if p.template is not None]

    def loss_fn(example):
        return model.loss(example[0], example[1], train=True, rng=rng)

    history = train_loop(
        model.params,
        examples,
        loss_fn,
        lambda: evaluate_seq2seq(model, validation),
        config.epochs,
        config.batch_size,
        config.lr,
        config.clip_norm,
        rng,
        (lambda: train_metrics(model, train)) if track_train_metrics else None,
    )
    return model, history


def load_seq2seq(path) -> Seq2SeqModel:
    ckpt = load_checkpoint(path)
    if ckpt.kind != "seq2seq":
        raise ValueError(f"{path} holds a {ckpt.kind!r} model, not seq2seq")
    model = Seq2SeqModel(
        Vocab(ckpt.vocabularies["source"]), Vocab(ckpt.vocabularies["target"]), Seq2SeqConfig(**ckpt.hyperparameters)
    )
    model.params.load_state(ckpt.params)
    return model
