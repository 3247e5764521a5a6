"""Learned significant-number tagger: a small BiLSTM over the context window of
each number mention, trained on labels aligned from gold equations."""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .config import SNITaggerConfig
from .nn import ops
from .nn.layers import LSTMParams, ParameterSet, bilstm_encode, make_rng
from .nn.optim import OptimizerState, sgd_epoch
from .text import (
    NumberMention,
    RawProblem,
    detect_numbers,
    gold_significance,
    parse_number,
    tokenize_with_spans,
)
from .training import make_batches
from .vocab import Vocab

MIN_LABELS = 50
PAD = "<pad>"


class InsufficientLabels(ValueError):
    pass


def mention_context(tokens: Sequence[str], mention: NumberMention, window: int) -> list[str]:
    """Tokens around a mention; the mention itself becomes a shape marker, other numbers <num>."""
    i = mention.token_index
    out = []
    for j in range(i - window, i + window + 1):
        if j < 0 or j >= len(tokens):
            out.append(PAD)
        elif j == i:
            out.append(f"<{mention.kind}>")
        else:
            out.append("<num>" if parse_number(tokens[j]) else tokens[j])
    return out


def _mentions_of(problem: RawProblem):
    tokenized = tokenize_with_spans(problem.text)
    tokens = [t for t, _, _ in tokenized]
    return tokens, detect_numbers(tokens, [(s, e) for _, s, e in tokenized])


def labeled_mentions(problems: Sequence[RawProblem], window: int):
    examples = []
    for p in problems:
        tokens, mentions = _mentions_of(p)
        for m, label in zip(mentions, gold_significance(p)):
            examples.append((mention_context(tokens, m, window), int(label)))
    return examples


class SNITagger:
    def __init__(self, vocab: Vocab, config: SNITaggerConfig, rng=None):
        self.vocab = vocab
        self.config = c = config
        rng = rng if rng is not None else make_rng(config.seed)
        self.params = ParameterSet()
        self.embedding = self.params.uniform("embedding", (len(vocab), c.embed_dim), rng, c.init_scale)
        self.fwd = LSTMParams.create(self.params, "fwd", c.embed_dim, c.hidden_dim, rng, c.init_scale)
        self.bwd = LSTMParams.create(self.params, "bwd", c.embed_dim, c.hidden_dim, rng, c.init_scale)
        self.W_out = self.params.uniform("out.W", (2, 2 * c.hidden_dim), rng, c.init_scale)
        self.b_out = self.params.add("out.b", np.zeros(2))

    def logits(self, context):
        X = ops.embedding_lookup(self.embedding, self.vocab.encode(context))
        _, h_n = bilstm_encode(X, self.fwd, self.bwd)
        return ops.matmul(self.W_out, h_n) + self.b_out

    def probability(self, context) -> float:
        return float(ops.softmax(self.logits(context)).data[1])

    def __call__(self, mentions: Sequence[NumberMention], tokens: Sequence[str]) -> list[NumberMention]:
        w = self.config.window
        return [
            replace(m, significant=self.probability(mention_context(tokens, m, w)) >= self.config.threshold)
            for m in mentions
        ]

    def accuracy(self, problems: Sequence[RawProblem]) -> float:
        """Per-mention agreement with the gold-aligned labels."""
        examples = labeled_mentions(problems, self.config.window)
        if not examples:
            return 0.0
        hits = sum((self.probability(ctx) >= self.config.threshold) == bool(y) for ctx, y in examples)
        return hits / len(examples)


def sni_tagger_train(problems: Sequence[RawProblem], config: SNITaggerConfig | None = None) -> SNITagger:
    config = config or SNITaggerConfig()
    examples = labeled_mentions(problems, config.window)
    if len(examples) < MIN_LABELS:
        raise InsufficientLabels(f"{len(examples)} labeled mentions, need at least {MIN_LABELS}")
    rng = make_rng(config.seed)
    vocab = Vocab.build([ctx for ctx, _ in examples], min_freq=config.unk_min_freq)
    tagger = SNITagger(vocab, config, rng)
    state = OptimizerState(learning_rate=config.lr, initial_lr=config.lr)

    def loss_fn(example):
        ctx, label = example
        return ops.cross_entropy(tagger.logits(ctx), label)

    for _ in range(config.epochs):
        batches = [[examples[i] for i in b] for b in make_batches(len(examples), config.batch_size, rng)]
        sgd_epoch(tagger.params, batches, state, loss_fn, config.clip_norm)
    return tagger


def sni_tagger_apply(tagger: SNITagger, mentions, tokens) -> list[bool]:
    return [bool(m.significant) for m in tagger(mentions, tokens)]
