"""Command-line entry point: ``mwp <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Environment variables are never consulted.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PRESETS, SOLVERS, build_experiment, parse_key_values
from .diagnostics import NEURAL_SOLVERS, check_gradients
from .equations import EquationError, instantiate, solve_template
from .harness import (
    EmptyTest,
    MalformedRecord,
    MetricInconsistency,
    OracleBoundViolation,
    TooFewProblems,
    build_report,
    evaluate_solver,
    load_dataset,
    make_splits,
    oracle_accuracy,
    prepare_splits,
    read_problems,
    run_experiment,
    write_outputs,
)
from .nn.autograd import NonFiniteGradient
from .nn.checkpoint import CheckpointError
from .retrieval import DimensionMismatch, EmbeddingFormatError
from .sni import InsufficientLabels
from .solvers import file_sha256, load_solver
from .text import EmptyText, RawProblem, UnalignableEquation, abstract_problem
from .vocab import EmptyVocab

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DATA_ERRORS = (
    FileNotFoundError,
    IsADirectoryError,
    MalformedRecord,
    EquationError,
    EmptyText,
    UnalignableEquation,
    TooFewProblems,
    EmptyTest,
    EmbeddingFormatError,
    DimensionMismatch,
    CheckpointError,
    InsufficientLabels,
    EmptyVocab,
    UnicodeDecodeError,
)
NUMERIC_ERRORS = (NonFiniteGradient, FloatingPointError, OracleBoundViolation, MetricInconsistency)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: usage: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _fmt(value) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{float(value):g}"


# ---------------------------------------------------------------------------
# commands


def cmd_templatize(args) -> int:
    problem = abstract_problem(RawProblem("input", args.text, args.equations), require_full_alignment=True)
    print(problem.template.canonical)
    bindings = problem.slot_values
    print("slots: " + " ".join(f"{k}={_fmt(v)}" for k, v in bindings.items()))
    solution = solve_template(instantiate(problem.template, bindings))
    print("solution: " + " ".join(f"{u}={_fmt(solution[u])}" for u in sorted(solution)))
    return EXIT_OK


def cmd_solve(args) -> int:
    solver, _ = load_solver(args.model)
    for raw in read_problems(args.problem_file):
        outcome = solver.solve(abstract_problem(raw))
        record = outcome.to_record()
        if not raw.gold_answers:
            record.pop("correct")
        print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def _settings(args) -> dict:
    """Defaults < config file < flags."""
    settings: dict = {}
    if args.config:
        settings.update(parse_key_values(Path(args.config).read_text(encoding="utf-8").splitlines()))
    flags = {
        "solver": args.solver,
        "data": args.data,
        "seed": args.seed,
        "embeddings": args.embeddings,
        "sni": args.sni,
        "preset": args.preset,
        "ratios": args.ratios,
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    if args.init_embeddings:
        settings["init_embeddings"] = True
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        settings[key.strip()] = value.strip()
    return settings


def cmd_train(args) -> int:
    try:
        config = build_experiment(_settings(args))
    except (KeyError, ValueError) as exc:
        raise UsageError(exc.args[0] if exc.args else str(exc)) from None
    if not Path(config.data).is_file():
        raise FileNotFoundError(f"dataset not found: {config.data}")
    out = Path(args.out)
    report, _, solver, _ = run_experiment(config, out)
    solver.save(
        out / "model.ckpt",
        {"experiment": config.to_dict(), "dataset_sha256": report.dataset_sha256, "config_hash": report.config_hash},
    )
    print(report.to_table(), end="")
    print(f"wrote {out / 'model.ckpt'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    solver, ckpt = load_solver(args.model)
    experiment = dict(ckpt.extra.get("experiment", {}))
    experiment.update(data=args.data, solver=solver.kind)
    if args.seed is not None:
        experiment["seed"] = args.seed
    settings = {k: v for k, v in experiment.items() if k in ("solver", "data", "seed", "sni", "embeddings", "ratios")}
    settings = {k: v for k, v in settings.items() if v is not None}
    if isinstance(settings.get("ratios"), (list, tuple)):
        settings["ratios"] = ",".join(str(r) for r in settings["ratios"])
    config = build_experiment(settings)
    if not Path(config.data).is_file():
        raise FileNotFoundError(f"dataset not found: {config.data}")
    train, val, test, load_report, _ = prepare_splits(config)
    outcomes = evaluate_solver(solver, test)
    report = build_report(
        solver.kind, outcomes, train, val, test,
        dataset=Path(config.data).name, dataset_sha256=file_sha256(config.data),
        config_hash=ckpt.extra.get("config_hash", ""), seed=config.seed,
        n_rejected=len(load_report.rejections), strict=config.strict_oracle_bound,
    )
    if args.out:
        write_outputs(args.out, report, outcomes)
    print(report.to_table(), end="")
    return EXIT_OK


def cmd_oracle(args) -> int:
    raws, load_report = load_dataset(args.data)
    ratios = tuple(float(r) for r in args.ratios.split(",")) if args.ratios else (0.8, 0.1, 0.1)
    train, val, test = make_splits(raws, ratios, args.seed)
    train_p = [abstract_problem(r) for r in train.problems]
    test_p = [abstract_problem(r) for r in test.problems]
    print(load_report.summary())
    print(f"split sizes: {len(train)} / {len(val)} / {len(test)} (seed {args.seed})")
    print(f"oracle accuracy: {oracle_accuracy(train_p, test_p):.4f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.solver not in NEURAL_SOLVERS:
        print(f"{args.solver} has no trainable parameters; nothing to check")
        return EXIT_OK
    result = check_gradients(args.solver, args.seed)
    for name, err in result.per_parameter.items():
        print(f"{name:20s} {err:.3e}")
    verdict = "PASS" if result.passed(args.tol) else "FAIL"
    print(f"{verdict} max relative error {result.max_relative_error:.3e} over {result.checked} elements (tol {args.tol:g})")
    return EXIT_OK if result.passed(args.tol) else EXIT_NUMERIC


# ---------------------------------------------------------------------------


def build_parser() -> Parser:
    parser = Parser(prog="mwp", description="Template-based math word problem solvers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("templatize", help="abstract a problem and its equations into a template")
    p.add_argument("text")
    p.add_argument("equations")
    p.set_defaults(func=cmd_templatize)

    p = sub.add_parser("solve", help="solve every problem in a file with a trained model")
    p.add_argument("problem_file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="train a solver and evaluate it on the test split")
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--data")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="runs/latest")
    p.add_argument("--config", help="key = value settings file (flags take precedence)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="e.g. classifier.hidden_dim=64")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--embeddings")
    p.add_argument("--init-embeddings", action="store_true")
    p.add_argument("--sni", choices=("rules", "learned"))
    p.add_argument("--ratios", help="train,validation,test fractions")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset's test split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle", help="share of test templates seen in training")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check of a tiny model")
    p.add_argument("--solver", required=True, choices=SOLVERS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stage = args.command
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mwp {stage}: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"mwp {stage}: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as exc:
        print(f"mwp {stage}: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
