"""Equation-template language: lexing, parsing, canonical rendering,
abstraction of numbers into slots, instantiation, and exact linear solving.

All arithmetic is done on ``fractions.Fraction``; floats appear only when an
answer is reported.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

UNKNOWNS = ("x", "y", "z")
MAX_UNKNOWNS = 4


class EquationError(ValueError):
    """Base class for everything raised by this module."""


class EquationSyntaxError(EquationError):
    def __init__(self, message, position, expected=()):
        self.position = position
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class EmptyInput(EquationError):
    pass


class MissingSlotValue(EquationError):
    def __init__(self, slot):
        self.slot = slot
        super().__init__(f"no value for slot {slot}")


class NonlinearTerm(EquationError):
    pass


class DivisionByZero(EquationError, ZeroDivisionError):
    pass


class Underdetermined(EquationError):
    pass


class Inconsistent(EquationError):
    pass


# ---------------------------------------------------------------------------
# slot naming


def slot_name(index: int) -> str:
    """A..Z for the first 26 slots, then A1..Z1, A2.. and so on."""
    if index < 0:
        raise ValueError("slot index must be non-negative")
    letter = chr(ord("A") + index % 26)
    round_ = index // 26
    return letter if round_ == 0 else f"{letter}{round_}"


_SLOT_RE = re.compile(r"^([A-Z])(\d*)$")


def slot_index(name: str) -> int:
    m = _SLOT_RE.match(name)
    if not m or m.group(2).startswith("0"):
        raise ValueError(f"not a slot id: {name!r}")
    round_ = int(m.group(2)) if m.group(2) else 0
    return round_ * 26 + ord(m.group(1)) - ord("A")


def is_slot_name(name: str) -> bool:
    try:
        slot_index(name)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# tokens


@dataclass(frozen=True)
class EquationToken:
    kind: str  # number | slot | unknown | op | lparen | rparen | equals | sep | end
    surface: str
    value: Fraction | None = None
    position: int = field(default=0, compare=False)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<number>(?:\d+(?:\.\d+)?|\.\d+)%?)
  | (?P<ident>[A-Za-z][A-Za-z0-9]*)
  | (?P<op>[-+*/])
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<equals>=)
  | (?P<sep>[;\n])
    """,
    re.VERBOSE,
)


def number_value(surface: str) -> Fraction:
    if surface.endswith("%"):
        return Fraction(surface[:-1]) / 100
    return Fraction(surface)


def lex(text: str) -> list[EquationToken]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise EquationSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        surface = m.group()
        if kind == "number":
            tokens.append(EquationToken("number", surface, number_value(surface), pos))
        elif kind == "ident":
            if surface in UNKNOWNS:
                tokens.append(EquationToken("unknown", surface, None, pos))
            elif is_slot_name(surface):
                tokens.append(EquationToken("slot", surface, None, pos))
            else:
                raise EquationSyntaxError(f"unknown identifier {surface!r}", pos)
        elif kind != "ws":
            tokens.append(EquationToken(kind, surface, None, pos))
        pos = m.end()
    tokens.append(EquationToken("end", "", None, len(text)))
    return tokens


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class SlotRef:
    name: str


@dataclass(frozen=True)
class UnknownRef:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, SlotRef, UnknownRef, Neg, BinOp]


@dataclass(frozen=True)
class Equation:
    lhs: Expr
    rhs: Expr


def iter_nodes(expr: Expr):
    yield expr
    if isinstance(expr, Neg):
        yield from iter_nodes(expr.operand)
    elif isinstance(expr, BinOp):
        yield from iter_nodes(expr.left)
        yield from iter_nodes(expr.right)


def _equation_nodes(equations):
    for eq in equations:
        yield from iter_nodes(eq.lhs)
        yield from iter_nodes(eq.rhs)


@dataclass(frozen=True, eq=False)
class EquationTemplate:
    """One or more equations over slots and unknowns.

    Equality and hashing go through the canonical string, so two templates are
    the same class label iff they render identically.  ``structurally_equal``
    compares the trees instead.
    """

    equations: tuple[Equation, ...]
    slots: tuple[str, ...] = ()
    unknowns: tuple[str, ...] = ()

    @classmethod
    def from_equations(cls, equations: Iterable[Equation], slot_order=None):
        equations = tuple(equations)
        used_slots = {n.name for n in _equation_nodes(equations) if isinstance(n, SlotRef)}
        used_unknowns = {n.name for n in _equation_nodes(equations) if isinstance(n, UnknownRef)}
        if slot_order is None:
            slots = tuple(sorted(used_slots, key=slot_index))
        else:
            slots = tuple(s for s in slot_order if s in used_slots)
        unknowns = tuple(u for u in UNKNOWNS if u in used_unknowns)
        return cls(equations, slots, unknowns)

    @property
    def canonical(self) -> str:
        return canonical_string(self)

    @property
    def literals(self) -> list[Fraction]:
        return [n.value for n in _equation_nodes(self.equations) if isinstance(n, Num)]

    def structurally_equal(self, other: "EquationTemplate") -> bool:
        return self.equations == other.equations

    def __eq__(self, other):
        if not isinstance(other, EquationTemplate):
            return NotImplemented
        return self.canonical == other.canonical

    def __hash__(self):
        return hash(self.canonical)

    def __str__(self):
        return self.canonical

    def __repr__(self):
        return f"EquationTemplate({self.canonical!r})"


# ---------------------------------------------------------------------------
# parser

_ATOM_START = {"number", "slot", "unknown", "lparen", "-"}


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def fail(self, expected):
        t = self.tok
        where = repr(t.surface) if t.kind != "end" else "end of input"
        raise EquationSyntaxError(f"unexpected {where}", t.position, expected)

    def skip_separators(self):
        while self.tok.kind == "sep":
            self.advance()

    def equation_set(self):
        self.skip_separators()
        equations = [self.equation()]
        while self.tok.kind == "sep":
            self.skip_separators()
            if self.tok.kind == "end":
                break
            equations.append(self.equation())
        if self.tok.kind != "end":
            self.fail({"';'", "end of input"})
        return equations

    def equation(self):
        lhs = self.expr()
        if self.tok.kind != "equals":
            self.fail({"'='", "operator"})
        self.advance()
        rhs = self.expr()
        return Equation(lhs, rhs)

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.surface in "+-":
            op = self.advance().surface
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.surface in "*/":
            op = self.advance().surface
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.surface == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Num(t.value)
        if t.kind == "slot":
            self.advance()
            return SlotRef(t.surface)
        if t.kind == "unknown":
            self.advance()
            return UnknownRef(t.surface)
        if t.kind == "lparen":
            self.advance()
            inner = self.expr()
            if self.tok.kind != "rparen":
                self.fail({"')'", "operator"})
            self.advance()
            return inner
        self.fail({"number", "slot", "unknown", "'('", "'-'"})


def parse_equation_set(text: str) -> EquationTemplate:
    """Parse ``;``/newline separated equations into a template-shaped AST.

    Slots are accepted too, so canonical strings re-parse.
    """
    if not text or not text.strip(" \t\r\n;"):
        raise EmptyInput("no equations given")
    tokens = lex(text)
    equations = _Parser(tokens).equation_set()
    template = EquationTemplate.from_equations(equations)
    if not template.unknowns:
        raise EquationSyntaxError("equation set mentions no unknown", len(text), {"unknown"})
    return template


parse_template = parse_equation_set


# ---------------------------------------------------------------------------
# canonical rendering


def format_number(value: Fraction) -> str:
    """Exact decimal for terminating fractions; parenthesised quotient otherwise."""
    value = Fraction(value)
    if value < 0:
        return f"( - {format_number(-value)} )"
    den = value.denominator
    k = 0
    scale = 1
    while den % 2 == 0 or den % 5 == 0:
        if den % 2 == 0:
            den //= 2
        else:
            den //= 5
    if den != 1:
        return f"( {value.numerator} / {value.denominator} )"
    while (value * scale).denominator != 1:
        scale *= 10
        k += 1
    digits = str(int(value * scale))
    if k == 0:
        return digits
    digits = digits.rjust(k + 1, "0")
    return f"{digits[:-k]}.{digits[-k:]}"


def render_expr(expr: Expr) -> str:
    if isinstance(expr, Num):
        return format_number(expr.value)
    if isinstance(expr, (SlotRef, UnknownRef)):
        return expr.name
    if isinstance(expr, Neg):
        return f"- {_render_operand(expr.operand)}"
    if isinstance(expr, BinOp):
        return f"{_render_operand(expr.left)} {expr.op} {_render_operand(expr.right)}"
    raise TypeError(f"not an expression: {expr!r}")


def _render_operand(expr: Expr) -> str:
    # nested binary expressions are always bracketed
    if isinstance(expr, BinOp):
        return f"( {render_expr(expr)} )"
    return render_expr(expr)


def canonical_string(template: EquationTemplate) -> str:
    return " ; ".join(
        f"{render_expr(eq.lhs)} = {render_expr(eq.rhs)}" for eq in template.equations
    )


# ---------------------------------------------------------------------------
# abstraction / instantiation


def _map_expr(expr: Expr, leaf) -> Expr:
    if isinstance(expr, Neg):
        return Neg(_map_expr(expr.operand, leaf))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, _map_expr(expr.left, leaf), _map_expr(expr.right, leaf))
    return leaf(expr)


def abstract_equations(
    template: EquationTemplate, slot_assignment: Mapping[Fraction, str]
) -> EquationTemplate:
    """Replace every literal whose value is assigned a slot by that slot."""
    assignment = {Fraction(v): s for v, s in slot_assignment.items()}

    def leaf(node):
        if isinstance(node, Num) and node.value in assignment:
            return SlotRef(assignment[node.value])
        return node

    equations = [Equation(_map_expr(e.lhs, leaf), _map_expr(e.rhs, leaf)) for e in template.equations]
    return EquationTemplate.from_equations(equations, slot_order=list(assignment.values()))


def instantiate(template: EquationTemplate, values: Mapping[str, Fraction]) -> EquationTemplate:
    for slot in template.slots:
        if slot not in values:
            raise MissingSlotValue(slot)

    def leaf(node):
        if isinstance(node, SlotRef):
            if node.name not in values:
                raise MissingSlotValue(node.name)
            return Num(Fraction(values[node.name]))
        return node

    equations = [Equation(_map_expr(e.lhs, leaf), _map_expr(e.rhs, leaf)) for e in template.equations]
    return EquationTemplate.from_equations(equations)


# ---------------------------------------------------------------------------
# linear forms and solving


@dataclass(frozen=True)
class LinearForm:
    constant: Fraction = Fraction(0)
    coefficients: Mapping[str, Fraction] = field(default_factory=dict)

    def coeff(self, unknown: str) -> Fraction:
        return self.coefficients.get(unknown, Fraction(0))

    def is_constant(self) -> bool:
        return all(c == 0 for c in self.coefficients.values())

    def _combine(self, other, sign):
        coeffs = dict(self.coefficients)
        for u, c in other.coefficients.items():
            coeffs[u] = coeffs.get(u, Fraction(0)) + sign * c
        return LinearForm(self.constant + sign * other.constant, coeffs)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(Fraction(-1))

    def scale(self, k: Fraction) -> "LinearForm":
        return LinearForm(self.constant * k, {u: c * k for u, c in self.coefficients.items()})

    def __mul__(self, other):
        if other.is_constant():
            return self.scale(other.constant).with_unknowns(other)
        if self.is_constant():
            return other.scale(self.constant).with_unknowns(self)
        raise NonlinearTerm("product of two terms that both contain unknowns")

    def __truediv__(self, other):
        if not other.is_constant():
            raise NonlinearTerm("division by a term containing an unknown")
        if other.constant == 0:
            raise DivisionByZero("division by zero")
        return self.scale(1 / other.constant).with_unknowns(other)

    def with_unknowns(self, other):
        # keep zero-coefficient entries so every mentioned unknown stays visible
        coeffs = dict(self.coefficients)
        for u in other.coefficients:
            coeffs.setdefault(u, Fraction(0))
        return LinearForm(self.constant, coeffs)

    def evaluate(self, assignment: Mapping[str, Fraction]) -> Fraction:
        return self.constant + sum(
            (c * Fraction(assignment[u]) for u, c in self.coefficients.items() if c != 0),
            Fraction(0),
        )


def _linearize(expr: Expr) -> LinearForm:
    if isinstance(expr, Num):
        return LinearForm(Fraction(expr.value), {})
    if isinstance(expr, UnknownRef):
        return LinearForm(Fraction(0), {expr.name: Fraction(1)})
    if isinstance(expr, SlotRef):
        raise EquationError(f"slot {expr.name} must be instantiated before solving")
    if isinstance(expr, Neg):
        return -_linearize(expr.operand)
    left, right = _linearize(expr.left), _linearize(expr.right)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    return left / right


def to_linear_forms(template: EquationTemplate) -> list[LinearForm]:
    """Each equation ``lhs = rhs`` becomes the form ``lhs - rhs`` (== 0)."""
    return [_linearize(eq.lhs) - _linearize(eq.rhs) for eq in template.equations]


def solve_linear_system(forms: list[LinearForm], unknowns=None) -> dict[str, Fraction]:
    """Exact Gauss-Jordan elimination with partial pivoting over rationals."""
    if not forms:
        raise EquationError("no equations to solve")
    if unknowns is None:
        seen = {u for f in forms for u in f.coefficients}
        unknowns = [u for u in UNKNOWNS if u in seen] + sorted(seen - set(UNKNOWNS))
    unknowns = list(unknowns)
    if len(unknowns) > MAX_UNKNOWNS:
        raise EquationError(f"at most {MAX_UNKNOWNS} unknowns are supported")

    n = len(unknowns)
    rows = [[f.coeff(u) for u in unknowns] + [-f.constant] for f in forms]
    pivot_cols = []
    r = 0
    for c in range(n):
        best = max(range(r, len(rows)), key=lambda i: abs(rows[i][c]), default=None)
        if best is None or rows[best][c] == 0:
            continue
        rows[r], rows[best] = rows[best], rows[r]
        pivot = rows[r][c]
        rows[r] = [v / pivot for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                k = rows[i][c]
                rows[i] = [a - k * b for a, b in zip(rows[i], rows[r])]
        pivot_cols.append(c)
        r += 1
        if r == len(rows):
            break

    for row in rows[r:]:
        if row[n] != 0:
            raise Inconsistent("equations contradict each other")
    if r < n:
        free = [unknowns[c] for c in range(n) if c not in pivot_cols]
        raise Underdetermined(f"cannot determine {', '.join(free)}")
    return {unknowns[c]: rows[i][n] for i, c in enumerate(pivot_cols)}


def solve_template(template: EquationTemplate) -> dict[str, Fraction]:
    """Solve a slot-free equation set, checking every unknown it mentions."""
    return solve_linear_system(to_linear_forms(template), template.unknowns)
