"""Problem text processing: tokenization, number mentions, rule-based
significant-number selection, and abstraction into slot form."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

from .equations import (
    EquationError,
    EquationTemplate,
    abstract_equations,
    parse_equation_set,
    slot_name,
)


class EmptyText(ValueError):
    pass


class UnalignableEquation(ValueError):
    pass


@dataclass(frozen=True)
class RawProblem:
    id: str
    text: str
    gold_equations: str = ""
    gold_answers: tuple[Fraction, ...] = ()
    split: str | None = None


@dataclass(frozen=True)
class NumberMention:
    surface: str
    value: Fraction
    char_span: tuple[int, int]
    token_index: int
    kind: str = "int"  # int | decimal | fraction | percent | money | ordinal | clock
    slot: str | None = None
    significant: bool | None = None


@dataclass(frozen=True)
class AbstractedProblem:
    id: str
    tokens: tuple[str, ...]
    mentions: tuple[NumberMention, ...]
    template: EquationTemplate | None = None
    answers: tuple[Fraction, ...] = ()
    text: str = field(default="", compare=False)

    @property
    def slot_values(self) -> dict[str, Fraction]:
        values = {}
        for m in self.mentions:
            if m.significant and m.slot not in values:
                values[m.slot] = m.value
        return values


# ---------------------------------------------------------------------------
# tokenization

_NUM = r"\d+(?:,\d{3})*(?:\.\d+)?|\.\d+"
_TOKEN_RE = re.compile(
    rf"""
    \d{{1,2}}:\d{{2}}(?:am|pm)?             # clock time
  | \d+(?:st|nd|rd|th)(?![a-z])            # ordinal
  | \$(?:{_NUM})                           # money
  | (?:{_NUM})(?:/\d+)?%?                  # integer, decimal, fraction, percent
  | [a-z\u00c0-\u024f]+(?:'[a-z]+)*        # latin word
  | [\u3040-\u30ff\u3400-\u4dbf\u4e00-\u9fff\uf900-\ufaff]   # one CJK character
  | \S                                     # any other symbol
    """,
    re.VERBOSE,
)


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    if not text or not text.strip():
        raise EmptyText("problem text is empty")
    lowered = text.lower()
    if len(lowered) != len(text):
        # rare casefold expansions would break the spans
        lowered = "".join(ch.lower() if len(ch.lower()) == 1 else ch for ch in text)
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(lowered)]


def tokenize_text(text: str) -> list[str]:
    """Lowercased tokens; punctuation kept, CJK split per character, numbers whole."""
    return [tok for tok, _, _ in tokenize_with_spans(text)]


# ---------------------------------------------------------------------------
# number detection

_PATTERNS = [
    ("clock", re.compile(r"^(\d{1,2}):(\d{2})(?:am|pm)?$")),
    ("ordinal", re.compile(r"^(\d+)(?:st|nd|rd|th)$")),
    ("money", re.compile(rf"^\$({_NUM})$")),
    ("percent", re.compile(rf"^({_NUM})%$")),
    ("fraction", re.compile(r"^(\d+)/(\d+)$")),
    ("decimal", re.compile(r"^(\d+(?:,\d{3})*\.\d+|\.\d+)$")),
    ("int", re.compile(r"^(\d+(?:,\d{3})*)$")),
]


def _plain(s: str) -> Fraction:
    return Fraction(s.replace(",", ""))


def parse_number(token: str) -> tuple[str, Fraction] | None:
    """Return (kind, exact value) for a numeric token, or None."""
    for kind, pattern in _PATTERNS:
        m = pattern.match(token)
        if not m:
            continue
        if kind == "clock":
            return kind, Fraction(int(m.group(1))) + Fraction(int(m.group(2)), 60)
        if kind == "fraction":
            den = int(m.group(2))
            if den == 0:
                return None
            return kind, Fraction(int(m.group(1)), den)
        if kind == "percent":
            return kind, _plain(m.group(1)) / 100
        return kind, _plain(m.group(1))
    return None


def detect_numbers(tokens: Sequence[str], spans: Sequence[tuple[int, int]] | None = None) -> list[NumberMention]:
    mentions = []
    for i, tok in enumerate(tokens):
        parsed = parse_number(tok)
        if parsed is None:
            continue
        kind, value = parsed
        span = spans[i] if spans is not None else (i, i + 1)
        mentions.append(NumberMention(tok, value, tuple(span), i, kind))
    return mentions


# ---------------------------------------------------------------------------
# significant number identification (rules)

_MONTHS = {
    "january", "february", "march", "april", "june", "july", "august",
    "september", "october", "november", "december",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
}
_YEAR_LEAD = {"in", "since", "until"}
_CLAUSE_END = {",", ".", "?", "!", ";", ":"}


def _is_date_or_year(m: NumberMention, tokens: Sequence[str]) -> bool:
    i = m.token_index
    prev = tokens[i - 1] if i > 0 else None
    nxt = tokens[i + 1] if i + 1 < len(tokens) else None
    if m.kind in ("int", "ordinal") and (prev in _MONTHS or nxt in _MONTHS):
        return True
    if m.kind == "int" and len(m.surface) == 4 and 1000 <= m.value <= 2999:
        return prev in _YEAR_LEAD and (nxt is None or nxt in _CLAUSE_END)
    return False


def _is_one_of(m: NumberMention, tokens: Sequence[str]) -> bool:
    i = m.token_index
    return m.kind == "int" and m.value == 1 and i + 1 < len(tokens) and tokens[i + 1] == "of"


def sni_rules(mentions: Sequence[NumberMention], tokens: Sequence[str]) -> list[NumberMention]:
    """Everything is significant except ordinals, clock times, dates and "1 of"."""
    out = []
    for m in mentions:
        excluded = (
            m.kind in ("ordinal", "clock")
            or _is_date_or_year(m, tokens)
            or _is_one_of(m, tokens)
        )
        out.append(replace(m, significant=not excluded))
    return out


SNIBackend = Callable[[Sequence[NumberMention], Sequence[str]], list]


# ---------------------------------------------------------------------------
# abstraction


def assign_slots(mentions: Sequence[NumberMention]) -> tuple[list[NumberMention], dict[Fraction, str]]:
    """Slots A, B, ... over significant mentions in text order; equal values share."""
    assignment: dict[Fraction, str] = {}
    out = []
    for m in sorted(mentions, key=lambda m: m.char_span[0]):
        if m.significant:
            if m.value not in assignment:
                assignment[m.value] = slot_name(len(assignment))
            out.append(replace(m, slot=assignment[m.value]))
        else:
            out.append(replace(m, slot=None))
    return out, assignment


def abstract_problem(
    raw: RawProblem,
    flags: Sequence[bool] | None = None,
    sni: SNIBackend | None = None,
    require_full_alignment: bool = False,
) -> AbstractedProblem:
    """Replace significant numbers by slots in both the text and the gold equations.

    ``flags`` overrides the SNI backend (one boolean per detected mention).
    """
    tokenized = tokenize_with_spans(raw.text)
    tokens = [t for t, _, _ in tokenized]
    mentions = detect_numbers(tokens, [(s, e) for _, s, e in tokenized])
    if flags is not None:
        if len(flags) != len(mentions):
            raise ValueError(f"{len(flags)} flags for {len(mentions)} mentions")
        mentions = [replace(m, significant=bool(f)) for m, f in zip(mentions, flags)]
    else:
        mentions = (sni or sni_rules)(mentions, tokens)
    mentions, assignment = assign_slots(mentions)

    for m in mentions:
        if m.slot is not None:
            tokens[m.token_index] = m.slot

    template = None
    if raw.gold_equations:
        template = abstract_equations(parse_equation_set(raw.gold_equations), assignment)
        if require_full_alignment and template.literals:
            raise UnalignableEquation(
                f"{raw.id}: constants {[str(v) for v in template.literals]} match no mention"
            )
    return AbstractedProblem(
        raw.id, tuple(tokens), tuple(mentions), template, tuple(raw.gold_answers), raw.text
    )


def gold_significance(problem: RawProblem) -> list[bool]:
    """Training labels for SNI: a mention is significant iff its value is a gold constant."""
    tokenized = tokenize_with_spans(problem.text)
    tokens = [t for t, _, _ in tokenized]
    mentions = detect_numbers(tokens, [(s, e) for _, s, e in tokenized])
    try:
        constants = set(parse_equation_set(problem.gold_equations).literals)
    except EquationError:
        constants = set()
    return [m.value in constants for m in mentions]
