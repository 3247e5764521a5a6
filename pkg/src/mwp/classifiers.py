"""Template classifiers: BiLSTM final-state softmax and structured self-attention."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .config import ClassifierConfig
from .nn import ops
from .nn.autograd import Tensor
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import EmptySequence, LSTMParams, ParameterSet, bilstm_encode, make_rng
from .outcome import SolveOutcome, solve_with_template
from .retrieval import DimensionMismatch, EmbeddingTable
from .text import AbstractedProblem
from .training import TrainingLog, train_loop
from .vocab import TemplateVocab, Vocab

KINDS = ("bilstm", "self_attn")


def self_attend(H: Tensor, W_s1, W_s2):
    """A = softmax(W_s2 tanh(W_s1 H^T)) row-wise, M = A H flattened, P = ||A A^T - I||_F^2."""
    if H.shape[0] == 0:
        raise EmptySequence("no hidden states to attend over")
    scores = ops.matmul(W_s2, ops.tanh(ops.matmul(W_s1, ops.transpose(H))))  # (r, T)
    A = ops.softmax(scores, axis=1)
    M = ops.matmul(A, H)  # (r, 2h)
    P = frobenius_penalty(A)
    return ops.reshape(M, (-1,)), P, A


def frobenius_penalty(A: Tensor) -> Tensor:
    r = A.shape[0]
    gram = ops.matmul(A, ops.transpose(A))
    return ops.total(ops.square(gram - np.eye(r)))


class BiLstmClassifier:
    kind = "bilstm"

    def __init__(self, vocab: Vocab, templates: TemplateVocab, config: ClassifierConfig, rng=None):
        self.vocab = vocab
        self.templates = templates
        self.config = config
        rng = rng if rng is not None else make_rng(config.seed)
        c = config
        self.params = ParameterSet()
        self.embedding = self.params.uniform("embedding", (len(vocab), c.embed_dim), rng, c.init_scale)
        self.fwd = LSTMParams.create(self.params, "fwd", c.embed_dim, c.hidden_dim, rng, c.init_scale)
        self.bwd = LSTMParams.create(self.params, "bwd", c.embed_dim, c.hidden_dim, rng, c.init_scale)
        self._init_head(rng)

    def _init_head(self, rng):
        c = self.config
        self.W_out = self.params.uniform("out.W", (len(self.templates), 2 * c.hidden_dim), rng, c.init_scale)

    def _dropout(self, x, enabled, train, rng):
        if not train or not enabled:
            return x
        return ops.dropout(x, self.config.dropout, rng, train=True)

    def encode(self, tokens: Sequence[str], train=False, rng=None):
        if not tokens:
            raise EmptySequence("problem has no tokens")
        c = self.config
        X = ops.embedding_lookup(self.embedding, self.vocab.encode(tokens))
        X = self._dropout(X, c.dropout_embeddings, train, rng)
        return bilstm_encode(X, self.fwd, self.bwd)

    def forward(self, tokens, train=False, rng=None):
        """Returns (logits, penalty or None)."""
        H, h_n = self.encode(tokens, train, rng)
        features = self._dropout(h_n, self.config.dropout_classifier_input, train, rng)
        return ops.matmul(self.W_out, features), None

    def loss(self, tokens, target: int, train=False, rng=None) -> Tensor:
        logits, penalty = self.forward(tokens, train, rng)
        loss = ops.cross_entropy(logits, target)
        if penalty is not None:
            loss = loss + penalty * self.config.penalty
        return loss

    def classify(self, tokens) -> np.ndarray:
        """Probability of every template class."""
        logits, _ = self.forward(tokens)
        return ops.softmax(logits).data

    def predict(self, tokens) -> str:
        return self.templates.classes[int(np.argmax(self.classify(tokens)))]

    # -- persistence
    def save(self, path, extra=None):
        save_checkpoint(
            path,
            self.kind,
            vars(self.config).copy(),
            {"source": self.vocab.tokens, "templates": self.templates.classes},
            self.params.state(),
            extra,
        )


class SelfAttnClassifier(BiLstmClassifier):
    kind = "self_attn"

    def _init_head(self, rng):
        c = self.config
        self.W_s1 = self.params.uniform("attn.W_s1", (c.attn_dim, 2 * c.hidden_dim), rng, c.init_scale)
        self.W_s2 = self.params.uniform("attn.W_s2", (c.hops, c.attn_dim), rng, c.init_scale)
        self.W_out = self.params.uniform(
            "out.W", (len(self.templates), c.hops * 2 * c.hidden_dim), rng, c.init_scale
        )

    def attend(self, tokens, train=False, rng=None):
        H, _ = self.encode(tokens, train, rng)
        H = self._dropout(H, self.config.dropout_encoder_output, train, rng)
        return self_attend(H, self.W_s1, self.W_s2)

    def forward(self, tokens, train=False, rng=None):
        M, P, _ = self.attend(tokens, train, rng)
        features = self._dropout(M, self.config.dropout_classifier_input, train, rng)
        return ops.matmul(self.W_out, features), P

    def attention(self, tokens) -> np.ndarray:
        return self.attend(tokens)[2].data


def build_classifier(kind, vocab, templates, config, rng=None):
    if kind == "bilstm":
        return BiLstmClassifier(vocab, templates, config, rng)
    if kind == "self_attn":
        return SelfAttnClassifier(vocab, templates, config, rng)
    raise ValueError(f"unknown classifier kind {kind!r}")


def classify_logits(model: BiLstmClassifier, tokens) -> np.ndarray:
    return model.classify(tokens)


def init_embeddings(model: BiLstmClassifier, table: EmbeddingTable) -> int:
    """Overwrite W_E rows of tokens found in ``table``; returns how many were set."""
    if table.dimension != model.config.embed_dim:
        raise DimensionMismatch(
            f"embedding file has dimension {table.dimension}, model uses {model.config.embed_dim}"
        )
    found = 0
    for i, tok in enumerate(model.vocab.tokens):
        if tok in table.vectors:
            model.embedding.data[i] = table.vectors[tok]
            found += 1
    return found


def predict_and_solve(model: BiLstmClassifier, problem: AbstractedProblem) -> SolveOutcome:
    return solve_with_template(problem, model.predict(problem.tokens))


def evaluate_classifier(model, problems: Sequence[AbstractedProblem]) -> dict:
    """Validation loss/perplexity over in-vocabulary gold classes plus solution accuracy."""
    losses = []
    correct = 0
    for p in problems:
        target = model.templates.id(p.template.canonical) if p.template is not None else None
        if target is not None:
            losses.append(ops.cross_entropy(model.forward(p.tokens)[0], target).item())
        correct += predict_and_solve(model, p).correct
    val_loss = float(np.mean(losses)) if losses else math.inf
    return {
        "val_loss": val_loss,
        "val_perplexity": math.exp(val_loss) if math.isfinite(val_loss) else math.inf,
        "val_accuracy": correct / len(problems) if problems else 0.0,
    }


def template_accuracy(model, problems) -> float:
    hits = sum(p.template is not None and model.predict(p.tokens) == p.template.canonical for p in problems)
    return hits / len(problems) if problems else 0.0


def train_classifier(
    kind: str,
    train: Sequence[AbstractedProblem],
    validation: Sequence[AbstractedProblem],
    config: ClassifierConfig | None = None,
    embeddings: EmbeddingTable | None = None,
    track_train_accuracy: bool = False,
) -> tuple[BiLstmClassifier, TrainingLog]:
    config = config or ClassifierConfig()
    if not train or not validation:
        raise ValueError("training and validation splits must be non-empty")
    rng = make_rng(config.seed)
    vocab = Vocab.build([p.tokens for p in train], min_freq=config.unk_min_freq)
    templates = TemplateVocab.from_problems(train)
    model = build_classifier(kind, vocab, templates, config, rng)
    if embeddings is not None:
        init_embeddings(model, embeddings)

    examples = [(p.tokens, templates.id(p.template.canonical)) for p in train if p.template is not None]

    def loss_fn(example):
        tokens, target = example
        return model.loss(tokens, target, train=True, rng=rng)

    history = train_loop(
        model.params,
        examples,
        loss_fn,
        lambda: evaluate_classifier(model, validation),
        config.epochs,
        config.batch_size,
        config.lr,
        config.clip_norm,
        rng,
        (lambda: {"train_accuracy": template_accuracy(model, train)}) if track_train_accuracy else None,
    )
    return model, history


def load_classifier(path) -> BiLstmClassifier:
    ckpt = load_checkpoint(path)
    if ckpt.kind not in KINDS:
        raise ValueError(f"{path} holds a {ckpt.kind!r} model, not a classifier")
    config = ClassifierConfig(**ckpt.hyperparameters)
    model = build_classifier(
        ckpt.kind, Vocab(ckpt.vocabularies["source"]), TemplateVocab(ckpt.vocabularies["templates"]), config
    )
    model.params.load_state(ckpt.params)
    return model
