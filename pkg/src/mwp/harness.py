"""Dataset ingestion, seeded splits, metrics and experiment orchestration."""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .config import ExperimentConfig
from .equations import EquationError, parse_equation_set, solve_template
from .nn.checkpoint import atomic_write_text
from .nn.layers import make_rng
from .outcome import FailureReason, SolveOutcome, answer_correct
from .sni import sni_tagger_train
from .solvers import CLOSED_CLASS, file_sha256, train_solver
from .text import AbstractedProblem, EmptyText, RawProblem, abstract_problem, sni_rules

SPLIT_NAMES = ("train", "validation", "test")


class MalformedRecord(ValueError):
    def __init__(self, message, line):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TooFewProblems(ValueError):
    pass


class EmptyTest(ValueError):
    pass


class OracleBoundViolation(AssertionError):
    pass


class MetricInconsistency(AssertionError):
    pass


# ---------------------------------------------------------------------------
# reading


def read_records(path) -> list[tuple[int, dict]]:
    """JSON objects from a file holding a JSON array, JSON lines, or back-to-back objects.

    Returns (line number, record) pairs.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    text = path.read_text(encoding="utf-8")
    decoder = json.JSONDecoder()
    records = []
    pos = 0
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(exc.msg, exc.lineno) from None
        start = len(text) - len(stripped)
        return [(text.count("\n", 0, start) + 1 + i, r) for i, r in enumerate(data)]
    while True:
        while pos < len(text) and text[pos] in " \t\r\n":
            pos += 1
        if pos >= len(text):
            break
        line = text.count("\n", 0, pos) + 1
        try:
            obj, pos = decoder.raw_decode(text, pos)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(exc.msg, exc.lineno) from None
        if not isinstance(obj, dict):
            raise MalformedRecord("record is not an object", line)
        records.append((line, obj))
    return records


def parse_answer(value) -> Fraction:
    if isinstance(value, bool):
        raise ValueError("boolean answer")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    s = str(value).strip()
    while s.startswith("(") and s.endswith(")"):
        s = s[1:-1].strip()
    if s.endswith("%"):
        return Fraction(s[:-1]) / 100
    m = re.fullmatch(r"(\d+)\((\d+)/(\d+)\)", s)  # mixed number 3(1/2)
    if m:
        return int(m.group(1)) + Fraction(int(m.group(2)), int(m.group(3)))
    return Fraction(s)


def record_to_problem(rec: dict, line: int, require_answers=True) -> RawProblem:
    """Native fields {id, text, equations, answers}; Math23K's {id, original_text, equation, ans} also accepted."""
    pid = rec.get("id", rec.get("iIndex"))
    text = rec.get("text", rec.get("original_text", rec.get("sQuestion")))
    equations = rec.get("equations", rec.get("equation", rec.get("lEquations")))
    answers = rec.get("answers", rec.get("ans", rec.get("lSolutions")))
    if pid is None or text is None:
        raise MalformedRecord("record needs 'id' and 'text'", line)
    if isinstance(equations, list):
        equations = " ; ".join(str(e) for e in equations)
    if answers is None:
        if require_answers:
            raise MalformedRecord(f"record {pid} has no answers", line)
        answers = []
    if not isinstance(answers, list):
        answers = [answers]
    try:
        gold = tuple(parse_answer(a) for a in answers)
    except (ValueError, ZeroDivisionError) as exc:
        raise MalformedRecord(f"record {pid}: bad answer ({exc})", line) from None
    split = rec.get("split")
    if split is not None and split not in SPLIT_NAMES:
        raise MalformedRecord(f"record {pid}: unknown split {split!r}", line)
    return RawProblem(str(pid), str(text), str(equations or ""), gold, split)


@dataclass
class LoadReport:
    path: str
    n_questions: int = 0
    n_templates: int = 0  # distinct canonical templates over every parseable record
    n_accepted: int = 0
    n_accepted_templates: int = 0
    rejections: list[tuple[str, str]] = field(default_factory=list)

    @property
    def rejection_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(reason.split(":")[0] for _, reason in self.rejections).items()))

    def summary(self) -> str:
        return (
            f"{self.path}: {self.n_questions} questions, {self.n_templates} distinct templates; "
            f"accepted {self.n_accepted} ({self.n_accepted_templates} templates), rejected {len(self.rejections)}"
        )


def check_problem(raw: RawProblem) -> str | None:
    """Reason to reject a problem, or None when it is usable."""
    if not raw.text.strip():
        return "empty-text"
    try:
        gold = parse_equation_set(raw.gold_equations)
    except EquationError as exc:
        return f"syntax: {exc}"
    if not raw.gold_answers:
        return "no-answers"
    try:
        solution = solve_template(gold)
    except EquationError as exc:
        return f"unsolvable: {type(exc).__name__}"
    answers = [float(solution[u]) for u in gold.unknowns]
    if not answer_correct(answers, raw.gold_answers):
        return "unsound: gold equations do not reproduce the gold answers"
    return None


def load_dataset(path) -> tuple[list[RawProblem], LoadReport]:
    """Parse a dataset file, rejecting problems that fail to parse or whose gold
    equations do not reproduce the gold answers."""
    report = LoadReport(str(path))
    accepted = []
    templates, accepted_templates = set(), set()
    seen_ids = set()
    for line, rec in read_records(path):
        raw = record_to_problem(rec, line)
        if raw.id in seen_ids:
            raise MalformedRecord(f"duplicate id {raw.id!r}", line)
        seen_ids.add(raw.id)
        report.n_questions += 1
        canonical = None
        try:
            canonical = abstract_problem(raw).template.canonical
            templates.add(canonical)
        except (EquationError, EmptyText):
            pass
        reason = check_problem(raw)
        if reason is not None:
            report.rejections.append((raw.id, reason))
            continue
        accepted.append(raw)
        accepted_templates.add(canonical)
    report.n_templates = len(templates)
    report.n_accepted = len(accepted)
    report.n_accepted_templates = len(accepted_templates)
    return accepted, report


def read_problems(path) -> list[RawProblem]:
    """Problems for solving; equations and answers are optional."""
    return [record_to_problem(rec, line, require_answers=False) for line, rec in read_records(path)]


# ---------------------------------------------------------------------------
# splits


@dataclass
class DatasetSplit:
    name: str
    problems: list
    seed: int
    ratios: tuple[float, float, float]

    def __len__(self):
        return len(self.problems)

    @property
    def ids(self):
        return [p.id for p in self.problems]


def split_sizes(n: int, ratios) -> tuple[int, int, int]:
    n_train = int(math.floor(n * ratios[0] + 0.5))
    n_val = int(math.floor(n * ratios[1] + 0.5))
    n_val = min(n_val, n - n_train)
    return n_train, n_val, n - n_train - n_val


def make_splits(problems: Sequence, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> tuple[DatasetSplit, ...]:
    """Seeded shuffle then contiguous train/validation/test partition.

    When every problem carries a published ``split`` it is used instead.
    """
    ratios = tuple(float(r) for r in ratios)
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    problems = list(problems)
    if problems and all(getattr(p, "split", None) for p in problems):
        return tuple(
            DatasetSplit(name, [p for p in problems if p.split == name], seed, ratios) for name in SPLIT_NAMES
        )
    if len(problems) < 3:
        raise TooFewProblems(f"need at least 3 problems, got {len(problems)}")
    order = make_rng(seed).permutation(len(problems))
    shuffled = [problems[i] for i in order]
    a, b, _ = split_sizes(len(problems), ratios)
    parts = (shuffled[:a], shuffled[a : a + b], shuffled[a + b :])
    return tuple(DatasetSplit(name, part, seed, ratios) for name, part in zip(SPLIT_NAMES, parts))


# ---------------------------------------------------------------------------
# metrics


def _canonical(p) -> str | None:
    if isinstance(p, AbstractedProblem):
        return p.template.canonical if p.template is not None else None
    return abstract_problem(p).template.canonical


def oracle_accuracy(train: Sequence, test: Sequence) -> float:
    """Share of test problems whose gold template occurs among the training templates."""
    if not test:
        raise EmptyTest("oracle accuracy of an empty test split")
    seen = {_canonical(p) for p in train}
    return sum(_canonical(p) in seen for p in test) / len(test)


@dataclass
class MetricsReport:
    solver: str
    dataset: str
    dataset_sha256: str
    config_hash: str
    seed: int
    n_train: int
    n_validation: int
    n_test: int
    n_rejected: int
    solution_accuracy: float
    oracle_accuracy: float
    template_accuracy: float
    failure_counts: dict[str, int]
    oracle_bound_ok: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        rows = [
            ("solver", self.solver),
            ("dataset", self.dataset),
            ("seed", str(self.seed)),
            ("train / validation / test", f"{self.n_train} / {self.n_validation} / {self.n_test}"),
            ("rejected problems", str(self.n_rejected)),
            ("solution accuracy", f"{100 * self.solution_accuracy:.1f}"),
            ("oracle accuracy", f"{100 * self.oracle_accuracy:.1f}"),
            ("template accuracy", f"{100 * self.template_accuracy:.1f}"),
        ]
        rows += [(f"  {k}", str(v)) for k, v in sorted(self.failure_counts.items())]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def check_outcome(outcome: SolveOutcome):
    """A correctly predicted template that could be instantiated must give the right answer."""
    if outcome.template_correct and outcome.answers is not None and not outcome.correct:
        raise MetricInconsistency(f"{outcome.problem_id}: gold template predicted but answer wrong")
    if outcome.correct and outcome.answers is None:
        raise MetricInconsistency(f"{outcome.problem_id}: correct without answers")


def summarize(outcomes: Sequence[SolveOutcome]) -> dict:
    n = len(outcomes)
    counts = Counter(o.failure_reason for o in outcomes if o.failure_reason)
    counts["wrong-answer"] = sum(1 for o in outcomes if o.failure_reason is None and not o.correct)
    for o in outcomes:
        check_outcome(o)
    return {
        "solution_accuracy": sum(o.correct for o in outcomes) / n if n else 0.0,
        "template_accuracy": sum(o.template_correct for o in outcomes) / n if n else 0.0,
        "failure_counts": {k: counts.get(k, 0) for k in (*FailureReason.ALL, "wrong-answer")},
    }


def evaluate_solver(solver, problems: Sequence[AbstractedProblem]) -> list[SolveOutcome]:
    return [solver.solve(p) for p in problems]


def build_report(solver_kind, outcomes, train, validation, test, *, dataset="", dataset_sha256="",
                 config_hash="", seed=0, n_rejected=0, strict=True, extra=None) -> MetricsReport:
    stats = summarize(outcomes)
    oracle = oracle_accuracy(train, test)
    bound_ok = solver_kind not in CLOSED_CLASS or stats["solution_accuracy"] <= oracle + 1e-12
    report = MetricsReport(
        solver_kind, dataset, dataset_sha256, config_hash, seed, len(train), len(validation), len(test),
        n_rejected, stats["solution_accuracy"], oracle, stats["template_accuracy"], stats["failure_counts"],
        bound_ok, extra or {},
    )
    if strict and not bound_ok:
        raise OracleBoundViolation(
            f"{solver_kind}: solution accuracy {report.solution_accuracy:.4f} exceeds oracle {oracle:.4f}"
        )
    return report


# ---------------------------------------------------------------------------
# experiments


def prepare_splits(config: ExperimentConfig):
    """Load, split and abstract a dataset. Returns (train, validation, test, load report, sni backend)."""
    raws, load_report = load_dataset(config.data)
    raw_train, raw_val, raw_test = make_splits(raws, config.ratios, config.seed)
    sni = sni_rules
    if config.sni == "learned":
        sni = sni_tagger_train(raw_train.problems, config.sni_tagger)
    splits = [[abstract_problem(r, sni=sni) for r in s.problems] for s in (raw_train, raw_val, raw_test)]
    return (*splits, load_report, sni)


def write_outputs(out_dir, report: MetricsReport, outcomes: Sequence[SolveOutcome], prefix=""):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / f"{prefix}report.json", report.to_json())
    atomic_write_text(out / f"{prefix}report.txt", report.to_table())
    atomic_write_text(
        out / f"{prefix}outcomes.jsonl",
        "".join(json.dumps(o.to_record(), sort_keys=True) + "\n" for o in outcomes),
    )


def run_experiment(config: ExperimentConfig, out_dir=None):
    """Train the configured solver, evaluate on the test split, return (report, outcomes, solver, log)."""
    train, val, test, load_report, _ = prepare_splits(config)
    solver, history = train_solver(
        config.solver, train, val, config.classifier, config.seq2seq, config.embeddings, config.init_embeddings
    )
    outcomes = evaluate_solver(solver, test)
    extra = {}
    if history is not None:
        extra["best_epoch"] = history.best_epoch
        extra["halvings"] = history.halvings
    report = build_report(
        config.solver, outcomes, train, val, test,
        dataset=Path(config.data).name, dataset_sha256=file_sha256(config.data),
        config_hash=config.digest(), seed=config.seed, n_rejected=len(load_report.rejections),
        strict=config.strict_oracle_bound, extra=extra,
    )
    if out_dir is not None:
        write_outputs(out_dir, report, outcomes)
        if history is not None:
            atomic_write_text(Path(out_dir) / "training_log.json", json.dumps(history.to_dict(), indent=2) + "\n")
    return report, outcomes, solver, history
