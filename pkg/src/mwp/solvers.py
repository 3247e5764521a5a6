"""Uniform solve/save/load surface over the retrieval, classification and generation solvers."""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Sequence

from .classifiers import BiLstmClassifier, load_classifier, predict_and_solve, train_classifier
from .config import ClassifierConfig, Seq2SeqConfig
from .equations import parse_template
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .outcome import SolveOutcome
from .retrieval import Corpus, EmbeddingTable, retrieve_and_solve
from .seq2seq import Seq2SeqModel, generate_and_solve, load_seq2seq, train_seq2seq
from .text import AbstractedProblem
from .training import TrainingLog

CLOSED_CLASS = {"jaccard", "cosine", "bilstm", "self_attn"}


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RetrievalSolver:
    def __init__(self, corpus: Corpus, metric: str, table: EmbeddingTable | None = None, embeddings_path=None):
        if metric == "cosine" and table is None:
            raise ValueError("cosine retrieval needs an embedding table")
        self.corpus = corpus
        self.kind = metric
        self.table = table
        self.embeddings_path = embeddings_path

    def solve(self, problem: AbstractedProblem) -> SolveOutcome:
        return retrieve_and_solve(problem, self.corpus, self.kind, self.table)

    def save(self, path, extra=None):
        hyper = {"metric": self.kind}
        if self.embeddings_path is not None:
            hyper["embeddings"] = str(self.embeddings_path)
            hyper["embeddings_sha256"] = file_sha256(self.embeddings_path)
        corpus = [
            {"id": p.id, "tokens": list(p.tokens), "template": t.canonical} for p, t in self.corpus.items
        ]
        save_checkpoint(
            path,
            self.kind,
            hyper,
            {"templates": sorted({t.canonical for _, t in self.corpus.items})},
            {},
            {"corpus": corpus, **(extra or {})},
        )


class ClassifierSolver:
    def __init__(self, model: BiLstmClassifier):
        self.model = model
        self.kind = model.kind

    def solve(self, problem):
        return predict_and_solve(self.model, problem)

    def save(self, path, extra=None):
        self.model.save(path, extra)


class Seq2SeqSolver:
    kind = "seq2seq"

    def __init__(self, model: Seq2SeqModel):
        self.model = model

    def solve(self, problem):
        return generate_and_solve(self.model, problem)

    def save(self, path, extra=None):
        self.model.save(path, extra)


def train_solver(
    kind: str,
    train: Sequence[AbstractedProblem],
    validation: Sequence[AbstractedProblem],
    classifier_config: ClassifierConfig | None = None,
    seq2seq_config: Seq2SeqConfig | None = None,
    embeddings_path=None,
    init_embeddings: bool = False,
):
    """Returns (solver, training log or None)."""
    if kind in ("jaccard", "cosine"):
        table = EmbeddingTable.load(embeddings_path) if kind == "cosine" else None
        return RetrievalSolver(Corpus.from_problems(train), kind, table, embeddings_path if table else None), None
    if kind in ("bilstm", "self_attn"):
        table = EmbeddingTable.load(embeddings_path) if init_embeddings else None
        model, history = train_classifier(kind, train, validation, classifier_config, table)
        return ClassifierSolver(model), history
    if kind == "seq2seq":
        model, history = train_seq2seq(train, validation, seq2seq_config)
        return Seq2SeqSolver(model), history
    raise ValueError(f"unknown solver {kind!r}")


def load_solver(path):
    ckpt = load_checkpoint(path)
    if ckpt.kind in ("jaccard", "cosine"):
        table, emb_path = None, None
        if ckpt.kind == "cosine":
            emb_path = ckpt.hyperparameters["embeddings"]
            if not Path(emb_path).exists():
                raise FileNotFoundError(emb_path)
            if file_sha256(emb_path) != ckpt.hyperparameters["embeddings_sha256"]:
                raise ValueError(f"{emb_path} changed since the checkpoint was written")
            table = EmbeddingTable.load(emb_path)
        items = [
            (AbstractedProblem(r["id"], tuple(r["tokens"]), ()), parse_template(r["template"]))
            for r in ckpt.extra["corpus"]
        ]
        return RetrievalSolver(Corpus(items), ckpt.kind, table, emb_path), ckpt
    if ckpt.kind in ("bilstm", "self_attn"):
        return ClassifierSolver(load_classifier(path)), ckpt
    if ckpt.kind == "seq2seq":
        return Seq2SeqSolver(load_seq2seq(path)), ckpt
    raise ValueError(f"unknown checkpoint kind {ckpt.kind!r}")


__all__ = [
    "CLOSED_CLASS",
    "RetrievalSolver",
    "ClassifierSolver",
    "Seq2SeqSolver",
    "train_solver",
    "load_solver",
    "TrainingLog",
]
