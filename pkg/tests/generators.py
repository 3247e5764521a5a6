"""Random equation sets, linear systems and an independent Cramer's-rule oracle."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from fractions import Fraction as F

import numpy as np

from mwp.equations import (
    BinOp,
    EquationError,
    Equation,
    EquationTemplate,
    Neg,
    Num,
    UnknownRef,
    instantiate,
    render_expr,
    solve_template,
)

UNKNOWNS = ("x", "y", "z")
OPS = "+-*/"


def random_literal(rng) -> Fraction:
    if rng.random() < 0.25:
        return Fraction(int(rng.integers(0, 1000)), 100)  # two-decimal literal
    return Fraction(int(rng.integers(0, 40)))


def random_expr(rng, depth: int, unknowns=UNKNOWNS):
    r = rng.random()
    if depth == 0 or r < 0.3:
        if rng.random() < 0.3:
            return UnknownRef(str(rng.choice(unknowns)))
        return Num(random_literal(rng))
    if r < 0.38:
        return Neg(random_expr(rng, depth - 1, unknowns))
    op = OPS[int(rng.integers(0, 4))]
    return BinOp(op, random_expr(rng, depth - 1, unknowns), random_expr(rng, depth - 1, unknowns))


def random_equation_text(rng, max_equations=3, depth=3) -> str:
    """Canonical text of a random equation set that mentions at least one unknown."""
    n = int(rng.integers(1, max_equations + 1))
    eqs = [Equation(random_expr(rng, depth), random_expr(rng, depth)) for _ in range(n)]
    text = " ; ".join(f"{render_expr(e.lhs)} = {render_expr(e.rhs)}" for e in eqs)
    if not any(u in text.split() for u in UNKNOWNS):
        text += " ; x = " + render_expr(random_expr(rng, 1, ("y",)))
    return text


def random_slot_assignment(template: EquationTemplate, rng) -> dict[Fraction, str]:
    """Map a random subset of the distinct literal values to slots A, B, ..."""
    values = sorted(set(template.literals))
    chosen = [v for v in values if rng.random() < 0.7]
    order = rng.permutation(len(chosen))
    names = [chr(ord("A") + i) for i in range(len(chosen))]
    return {chosen[j]: names[i] for i, j in enumerate(order)}


# -- linear systems


def det(m: list[list[Fraction]]) -> Fraction:
    """Leibniz expansion; fine for n <= 4."""
    n = len(m)
    total = Fraction(0)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = Fraction(-1 if inversions % 2 else 1)
        for i in range(n):
            term *= m[i][perm[i]]
        total += term
    return total


def cramer(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    d = det(a)
    if d == 0:
        return None
    out = []
    for k in range(len(a)):
        ak = [row[:k] + [b[i]] + row[k + 1 :] for i, row in enumerate(a)]
        out.append(det(ak) / d)
    return out


def random_fraction(rng, lo=-9, hi=9) -> Fraction:
    num = int(rng.integers(lo, hi + 1))
    den = 1 if rng.random() < 0.6 else int(rng.integers(1, 6))
    return Fraction(num, den)


def system_text(a, b, unknowns) -> str:
    """Equations with the unknown terms split across both sides, to exercise the reduction."""
    eqs = []
    for row, rhs in zip(a, b):
        lhs_terms, rhs_terms = [], []
        for c, u in zip(row, unknowns):
            side = lhs_terms if (c.numerator + c.denominator) % 2 else rhs_terms
            coeff = c if side is lhs_terms else -c
            side.append(f"( {_lit(coeff)} ) * {u}")
        lhs = " + ".join(lhs_terms) or "0"
        rhs_terms.append(f"( {_lit(rhs)} )")
        eqs.append(f"{lhs} = {' + '.join(rhs_terms)}")
    return " ; ".join(eqs)


def _lit(v: Fraction) -> str:
    sign = "- " if v < 0 else ""
    v = abs(v)
    body = str(v.numerator) if v.denominator == 1 else f"{v.numerator} / {v.denominator}"
    return f"{sign}{body}" if not sign else f"{sign}( {body} )"


def random_system(rng, n: int):
    unknowns = list(UNKNOWNS[:n])
    while True:
        a = [[random_fraction(rng) for _ in range(n)] for _ in range(n)]
        b = [random_fraction(rng, -30, 30) for _ in range(n)]
        solution = cramer(a, b)
        if solution is not None:
            return a, b, unknowns, solution


def as_array(a) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in a])


# -- exhaustive pairwise oracle


def brute_force_accuracy(train, test):
    """Independent nearest-neighbour search over every (test, train) pair."""

    def tokset(p):
        return {"<slot>" if (t[0].isupper() and (len(t) == 1 or t[1:].isdigit())) else t for t in p.tokens}

    correct = 0
    for q in test:
        best, best_sim = None, None
        for i, p in enumerate(train):
            s, t = tokset(q), tokset(p)
            sim = F(len(s & t), len(s | t))
            if best_sim is None or sim > best_sim:
                best, best_sim = i, sim
        template = train[best].template
        try:
            values = solve_template(instantiate(template, q.slot_values))
        except EquationError:
            continue
        predicted = [float(values[u]) for u in template.unknowns]
        gold = sorted(float(a) for a in q.answers)
        if len(predicted) == len(gold) and all(
            math.isclose(p, g, rel_tol=1e-3, abs_tol=1e-3) for p, g in zip(sorted(predicted), gold)
        ):
            correct += 1
    return correct / len(test)
