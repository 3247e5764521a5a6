"""Nearest-neighbour template retrieval with Jaccard or averaged-embedding cosine similarity."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .equations import EquationTemplate, is_slot_name
from .outcome import SolveOutcome, solve_with_template
from .text import AbstractedProblem

SLOT_PLACEHOLDER = "<slot>"


class DimensionMismatch(ValueError):
    pass


class EmbeddingFormatError(ValueError):
    def __init__(self, message, line):
        self.line = line
        super().__init__(f"line {line}: {message}")


def jaccard_similarity(s: set, t: set) -> Fraction:
    if not s and not t:
        return Fraction(1)
    return Fraction(len(s & t), len(s | t))


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        if self.dimension <= 0:
            raise ValueError("embedding dimension must be positive")
        for tok, vec in self.vectors.items():
            if vec.shape != (self.dimension,):
                raise DimensionMismatch(f"{tok!r} has shape {vec.shape}, expected ({self.dimension},)")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"non-finite entry in vector for {tok!r}")

    def __contains__(self, token):
        return token in self.vectors

    def __len__(self):
        return len(self.vectors)

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        """Read GloVe-style text: a token then its floats, one token per line."""
        vectors = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").rstrip().split(" ")
                if not parts or parts == [""]:
                    continue
                token, raw = parts[0], parts[1:]
                try:
                    vec = np.array([float(x) for x in raw], dtype=np.float64)
                except ValueError as exc:
                    raise EmbeddingFormatError(str(exc), lineno) from None
                if dim is None:
                    dim = len(vec)
                    if dim == 0:
                        raise EmbeddingFormatError("no vector values", lineno)
                elif len(vec) != dim:
                    raise EmbeddingFormatError(f"dimension {len(vec)} differs from {dim}", lineno)
                if not np.all(np.isfinite(vec)):
                    raise EmbeddingFormatError("non-finite value", lineno)
                vectors[token] = vec
        if dim is None:
            raise EmbeddingFormatError("empty embedding file", 0)
        return cls(dim, vectors)


def average_embedding(tokens: Iterable[str], table: EmbeddingTable) -> np.ndarray:
    vecs = [table.vectors[t] for t in tokens if t in table.vectors]
    if not vecs:
        return np.zeros(table.dimension)
    return np.mean(vecs, axis=0)


def retrieval_tokens(tokens: Sequence[str]) -> list[str]:
    return [SLOT_PLACEHOLDER if is_slot_name(t) else t for t in tokens]


class Corpus:
    """Training problems with their gold templates and cached token sets."""

    def __init__(self, items: Sequence[tuple[AbstractedProblem, EquationTemplate]]):
        if not items:
            raise ValueError("retrieval corpus is empty")
        self.items = list(items)
        self.token_sets = [frozenset(retrieval_tokens(p.tokens)) for p, _ in self.items]
        self._vectors = None
        self._vector_table = None

    @classmethod
    def from_problems(cls, problems: Sequence[AbstractedProblem]) -> "Corpus":
        return cls([(p, p.template) for p in problems if p.template is not None])

    def __len__(self):
        return len(self.items)

    def vectors(self, table: EmbeddingTable) -> np.ndarray:
        if self._vector_table is not table:
            self._vectors = np.stack([average_embedding(retrieval_tokens(p.tokens), table) for p, _ in self.items])
            self._vector_table = table
        return self._vectors

    def similarities(self, tokens: Sequence[str], metric: str, table: EmbeddingTable | None = None) -> list:
        tokens = retrieval_tokens(tokens)
        if metric == "jaccard":
            query = frozenset(tokens)
            return [jaccard_similarity(query, s) for s in self.token_sets]
        if metric == "cosine":
            if table is None:
                raise ValueError("cosine retrieval needs an embedding table")
            query = average_embedding(tokens, table)
            return [cosine_similarity(query, v) for v in self.vectors(table)]
        raise ValueError(f"unknown metric {metric!r}")

    def nearest(self, tokens: Sequence[str], metric: str, table: EmbeddingTable | None = None) -> int:
        sims = self.similarities(tokens, metric, table)
        best = 0
        for i, s in enumerate(sims):
            # strict > keeps the lowest index on ties
            if s > sims[best]:
                best = i
        return best


def retrieve_and_solve(
    test: AbstractedProblem, corpus: Corpus, metric: str = "jaccard", table: EmbeddingTable | None = None
) -> SolveOutcome:
    idx = corpus.nearest(test.tokens, metric, table)
    return solve_with_template(test, corpus.items[idx][1])
