"""Per-problem solve outcomes and answer checking shared by every solver."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .equations import (
    DivisionByZero,
    EquationError,
    EquationTemplate,
    Inconsistent,
    MissingSlotValue,
    NonlinearTerm,
    Underdetermined,
    instantiate,
    parse_equation_set,
    solve_template,
)
from .text import AbstractedProblem

ANSWER_TOLERANCE = 1e-3


class FailureReason:
    NO_PREDICTION = "no-prediction"
    UNPARSEABLE = "unparseable"
    UNKNOWN_SLOT = "unknown-slot"
    NONLINEAR = "nonlinear"
    NON_TERMINATED = "non-terminated"
    UNSOLVABLE = "unsolvable"

    ALL = (NO_PREDICTION, UNPARSEABLE, UNKNOWN_SLOT, NONLINEAR, NON_TERMINATED, UNSOLVABLE)


@dataclass(frozen=True)
class SolveOutcome:
    problem_id: str
    predicted_template: str | None
    answers: tuple[float, ...] | None
    correct: bool
    failure_reason: str | None = None
    gold_template: str | None = None

    @property
    def template_correct(self) -> bool:
        return self.predicted_template is not None and self.predicted_template == self.gold_template

    def to_record(self) -> dict:
        return {
            "id": self.problem_id,
            "predicted_template": self.predicted_template,
            "gold_template": self.gold_template,
            "answers": list(self.answers) if self.answers is not None else None,
            "correct": self.correct,
            "failure_reason": self.failure_reason,
        }


def answer_correct(predicted: Sequence[float], gold: Sequence[Fraction], tol: float = ANSWER_TOLERANCE) -> bool:
    """Multiset comparison; each sorted pair within tol * max(1, |gold|)."""
    if not predicted or not gold or len(predicted) != len(gold):
        return False
    for p, g in zip(sorted(float(p) for p in predicted), sorted(float(g) for g in gold)):
        if abs(p - g) > tol * max(1.0, abs(g)):
            return False
    return True


def failed_outcome(problem, predicted, reason):
    gold = problem.template.canonical if problem.template is not None else None
    return SolveOutcome(problem.id, predicted, None, False, reason, gold)


def solve_with_template(problem: AbstractedProblem, template: EquationTemplate | str | None) -> SolveOutcome:
    """Instantiate a predicted template with the problem's slot values and solve it."""
    if template is None:
        return failed_outcome(problem, None, FailureReason.NO_PREDICTION)
    if isinstance(template, str):
        try:
            template = parse_equation_set(template)
        except EquationError:
            return failed_outcome(problem, template, FailureReason.UNPARSEABLE)
    predicted = template.canonical
    try:
        concrete = instantiate(template, problem.slot_values)
        solution = solve_template(concrete)
    except MissingSlotValue:
        return failed_outcome(problem, predicted, FailureReason.UNKNOWN_SLOT)
    except NonlinearTerm:
        return failed_outcome(problem, predicted, FailureReason.NONLINEAR)
    except (Underdetermined, Inconsistent, DivisionByZero, EquationError):
        return failed_outcome(problem, predicted, FailureReason.UNSOLVABLE)
    answers = tuple(float(solution[u]) for u in concrete.unknowns)
    gold = problem.template.canonical if problem.template is not None else None
    return SolveOutcome(problem.id, predicted, answers, answer_correct(answers, problem.answers), None, gold)


def alignment_sound(problem: AbstractedProblem) -> bool:
    """Does the gold template, filled with this problem's slot values, give the gold answers?"""
    if problem.template is None:
        return False
    return solve_with_template(problem, problem.template).correct
