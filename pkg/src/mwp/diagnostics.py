"""Gradient checks on tiny seeded models of each neural solver."""
from __future__ import annotations

from .classifiers import build_classifier
from .config import ClassifierConfig, Seq2SeqConfig
from .nn.gradcheck import GradCheckResult, gradient_check
from .nn.layers import make_rng
from .seq2seq import Seq2SeqModel, build_vocabs
from .vocab import EOS, SOS, UNK, TemplateVocab, Vocab

NEURAL_SOLVERS = ("bilstm", "self_attn", "seq2seq")

# Larger than the training init so every gradient sits well above the
# relative-error floor; at 0.08 many entries are ~1e-8 and pure roundoff.
CHECK_INIT_SCALE = 0.5

# 20 tokens for the classifiers, a 5-token source for seq2seq
SOURCE = "tom has A apples and buys B more apples at the shop . how many apples does tom have ?".split()
SHORT_SOURCE = ["tom", "has", "A", "apples", "?"]
WORDS = [UNK, "tom", "has", "A", "B", "apples", "and", "buys", "more", "at", "the", "shop", ".", "how", "many"]
TEMPLATES = ["x = A + B", "x = A - B", "x = A * B"]
TARGET_TOKENS = [UNK, SOS, EOS, "x", "=", "A", "B", "+", "-"]


def tiny_model(kind: str, seed: int = 0):
    rng = make_rng(seed)
    if kind in ("bilstm", "self_attn"):
        config = ClassifierConfig(
            embed_dim=4, hidden_dim=3, attn_dim=5, hops=2, dropout=0.0, init_scale=CHECK_INIT_SCALE, seed=seed
        )
        return build_classifier(kind, Vocab(WORDS), TemplateVocab(TEMPLATES), config, rng)
    if kind == "seq2seq":
        config = Seq2SeqConfig(embed_dim=4, hidden_dim=3, dropout=0.0, init_scale=CHECK_INIT_SCALE, seed=seed)
        return Seq2SeqModel(Vocab(WORDS), Vocab(TARGET_TOKENS), config, rng)
    raise ValueError(f"{kind!r} has no trainable parameters; choose from {', '.join(NEURAL_SOLVERS)}")


def check_gradients(kind: str, seed: int = 0) -> GradCheckResult:
    """Central differences against tape gradients for every parameter element of a tiny model."""
    model = tiny_model(kind, seed)
    if kind == "seq2seq":
        target = "x = A + B".split()
        return gradient_check(model.params, lambda: model.loss(SHORT_SOURCE, target))
    return gradient_check(model.params, lambda: model.loss(SOURCE, 1))


# -- seeded regression models (outputs frozen in the golden files of the test suite)

REGRESSION_CLASSIFIER = dict(embed_dim=8, hidden_dim=6, attn_dim=5, hops=2)
REGRESSION_SEQ2SEQ = dict(embed_dim=8, hidden_dim=6)


def regression_classifier(kind: str, train, seed: int = 0):
    config = ClassifierConfig(seed=seed, **REGRESSION_CLASSIFIER)
    vocab = Vocab.build([p.tokens for p in train], min_freq=config.unk_min_freq)
    return build_classifier(kind, vocab, TemplateVocab.from_problems(train), config, make_rng(seed))


def regression_seq2seq(train, seed: int = 0):
    config = Seq2SeqConfig(seed=seed, **REGRESSION_SEQ2SEQ)
    source, target = build_vocabs(train, config)
    return Seq2SeqModel(source, target, config, make_rng(seed))
