"""Token and template-class vocabularies."""
from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

UNK = "<unk>"
SOS = "<s>"
EOS = "</s>"


class EmptyVocab(ValueError):
    pass


class Vocab:
    def __init__(self, tokens: Sequence[str], unk: str | None = UNK):
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.unk = unk
        if unk is not None and unk not in self.index:
            raise ValueError(f"{unk!r} missing from vocabulary")

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], min_freq: int = 1, specials=(UNK,)):
        """Specials first, then tokens seen at least ``min_freq`` times, by frequency then text."""
        counts = Counter(t for seq in sequences for t in seq)
        kept = sorted((t for t, c in counts.items() if c >= min_freq and t not in specials),
                      key=lambda t: (-counts[t], t))
        return cls(list(specials) + kept, unk=UNK if UNK in specials else None)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def id(self, token: str) -> int:
        if token in self.index:
            return self.index[token]
        if self.unk is None:
            raise KeyError(token)
        return self.index[self.unk]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


class TemplateVocab:
    """Closed set of template classes, identified by canonical string."""

    def __init__(self, classes: Sequence[str]):
        if not classes:
            raise EmptyVocab("no template classes")
        self.classes = list(classes)
        self.index = {c: i for i, c in enumerate(self.classes)}
        if len(self.index) != len(self.classes):
            raise ValueError("duplicate template classes")

    @classmethod
    def from_problems(cls, problems) -> "TemplateVocab":
        return cls(sorted({p.template.canonical for p in problems if p.template is not None}))

    def __len__(self):
        return len(self.classes)

    def __contains__(self, canonical):
        return canonical in self.index

    def id(self, canonical: str) -> int | None:
        return self.index.get(canonical)
