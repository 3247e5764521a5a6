import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PARAPHRASE, RETRIEVAL
from generators import brute_force_accuracy
from mwp.config import ClassifierConfig, ExperimentConfig
from mwp.harness import (
    EmptyTest,
    MalformedRecord,
    MetricInconsistency,
    OracleBoundViolation,
    TooFewProblems,
    build_report,
    check_outcome,
    load_dataset,
    make_splits,
    oracle_accuracy,
    parse_answer,
    read_records,
    run_experiment,
    split_sizes,
)
from mwp.outcome import SolveOutcome, answer_correct
from mwp.text import RawProblem, abstract_problem


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def record(i, text="Tom has 3 apples and buys 5 more.", equations="x = 3 + 5", answers=(8,), **kw):
    return {"id": f"p{i}", "text": text, "equations": equations, "answers": list(answers), **kw}


def raw(i, split=None):
    return RawProblem(f"p{i}", "Tom has 3 apples and buys 5 more.", "x = 3 + 5", (F(8),), split)


# -- reading


def test_empty_file_gives_no_problems(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    problems, report = load_dataset(path)
    assert problems == [] and report.n_questions == 0


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope.jsonl")


def test_syntax_error_is_rejected_not_fatal(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [record(1), record(2, equations="2 + = x")])
    problems, report = load_dataset(path)
    assert [p.id for p in problems] == ["p1"]
    ((pid, reason),) = report.rejections
    assert pid == "p2" and reason.startswith("syntax")
    assert report.rejection_counts == {"syntax": 1}


def test_unsound_and_unsolvable_are_rejected(tmp_path):
    path = write_jsonl(
        tmp_path / "d.jsonl",
        [record(1, answers=(9,)), record(2, equations="x + y = 8"), record(3, answers=())],
    )
    problems, report = load_dataset(path)
    assert problems == []
    assert report.rejection_counts == {"no-answers": 1, "unsolvable": 1, "unsound": 1}


def test_malformed_record_reports_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps(record(1)) + "\n{not json\n", encoding="utf-8")
    with pytest.raises(MalformedRecord) as info:
        load_dataset(path)
    assert info.value.line == 2


def test_duplicate_ids(tmp_path):
    with pytest.raises(MalformedRecord):
        load_dataset(write_jsonl(tmp_path / "d.jsonl", [record(1), record(1)]))


def test_array_and_concatenated_objects(tmp_path):
    a = tmp_path / "a.json"
    a.write_text(json.dumps([record(1), record(2)], indent=1), encoding="utf-8")
    b = tmp_path / "b.json"
    b.write_text(json.dumps(record(1), indent=2) + json.dumps(record(2), indent=2), encoding="utf-8")
    assert [r["id"] for _, r in read_records(a)] == ["p1", "p2"]
    assert [line for line, _ in read_records(b)] == [1, 8]


def test_math23k_fields(tmp_path):
    path = tmp_path / "m.json"
    recs = [
        {"id": "1", "original_text": "甲有3个苹果，又买了5个", "equation": "x=3+5", "ans": "8"},
        {"id": "2", "original_text": "一半是2", "equation": "x=2/(1/2)", "ans": "4"},
        {"id": "3", "original_text": "打折50%", "equation": "x=80*50%", "ans": "40"},
    ]
    path.write_text(json.dumps(recs, ensure_ascii=False), encoding="utf-8")
    problems, report = load_dataset(path)
    assert report.n_questions == 3 and not report.rejections
    assert abstract_problem(problems[0]).template.canonical == "x = A + B"


@pytest.mark.parametrize(
    "value, expected",
    [(8, F(8)), (0.5, F(1, 2)), ("3/4", F(3, 4)), ("50%", F(1, 2)), ("(1/2)", F(1, 2)), ("3(1/2)", F(7, 2))],
)
def test_parse_answer(value, expected):
    assert parse_answer(value) == expected


# -- splits


def test_split_sizes_for_ten():
    train, val, test = make_splits([raw(i) for i in range(10)])
    assert (len(train), len(val), len(test)) == (8, 1, 1)


def test_same_seed_same_split():
    problems = [raw(i) for i in range(50)]
    assert [s.ids for s in make_splits(problems, seed=4)] == [s.ids for s in make_splits(problems, seed=4)]


def test_different_seeds_differ():
    problems = [raw(i) for i in range(100)]
    assert make_splits(problems, seed=0)[0].ids != make_splits(problems, seed=1)[0].ids


def test_too_few_problems():
    with pytest.raises(TooFewProblems):
        make_splits([raw(1), raw(2)])


def test_published_split_wins():
    problems = [raw(1, "test"), raw(2, "train"), raw(3, "train"), raw(4, "validation")]
    train, val, test = make_splits(problems, seed=7)
    assert (train.ids, val.ids, test.ids) == (["p2", "p3"], ["p4"], ["p1"])


@given(st.integers(min_value=3, max_value=300), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_splits_partition_the_dataset(n, seed):
    problems = [raw(i) for i in range(n)]
    parts = make_splits(problems, seed=seed)
    ids = [i for s in parts for i in s.ids]
    assert sorted(ids) == sorted(p.id for p in problems)
    assert len(set(ids)) == n
    assert tuple(len(s) for s in parts) == split_sizes(n, (0.8, 0.1, 0.1))


# -- metrics


def abstracted(eq, i=0):
    return abstract_problem(RawProblem(f"q{i}", "Tom has 3 apples and buys 5 more.", eq, (F(8),)))


def test_oracle_accuracy():
    train = [abstracted("x = 3 + 5"), abstracted("x = 5 + 3")]
    assert oracle_accuracy(train, [abstracted("x = 3 + 5")]) == 1.0
    assert oracle_accuracy(train, [abstracted("x = 3 * 5 - 7")]) == 0.0
    with pytest.raises(EmptyTest):
        oracle_accuracy(train, [])


def test_answer_correct():
    assert answer_correct([17.0], [F(17)])
    assert answer_correct([6, 4], [F(4), F(6)])
    assert not answer_correct([17.1], [F(17)])
    assert not answer_correct([], [F(1)])
    assert not answer_correct([1, 2], [F(1)])


def test_oracle_bound_violation_is_raised():
    # commutative variants are distinct templates, so this prediction is right but unseen
    train = [abstracted("x = 3 + 5")]
    test = [abstracted("x = 5 + 3")]
    outcomes = [SolveOutcome("q0", "x = A + B", (8.0,), True, None, "x = B + A")]
    with pytest.raises(OracleBoundViolation):
        build_report("jaccard", outcomes, train, [], test)
    report = build_report("jaccard", outcomes, train, [], test, strict=False)
    assert not report.oracle_bound_ok
    # generators are not closed-class, the bound does not apply
    assert build_report("seq2seq", outcomes, train, [], test).oracle_bound_ok


def test_check_outcome():
    check_outcome(SolveOutcome("a", "x = A", (1.0,), True, None, "x = A"))
    with pytest.raises(MetricInconsistency):
        check_outcome(SolveOutcome("a", "x = A", (2.0,), False, None, "x = A"))
    with pytest.raises(MetricInconsistency):
        check_outcome(SolveOutcome("a", None, None, True, "no-prediction", "x = A"))


# -- experiments


def test_jaccard_experiment_matches_brute_force(retrieval_splits):
    train, _, test = retrieval_splits
    report, outcomes, _, _ = run_experiment(ExperimentConfig("jaccard", str(RETRIEVAL)))
    assert report.n_test == len(test) == len(outcomes)
    assert report.solution_accuracy == brute_force_accuracy(train, test)
    assert report.solution_accuracy <= report.oracle_accuracy
    assert sum(report.failure_counts.values()) == sum(not o.correct for o in outcomes)


def test_experiment_outputs_are_byte_identical(tmp_path):
    config = ExperimentConfig("jaccard", str(RETRIEVAL), seed=3)
    for name in ("a", "b"):
        run_experiment(config, tmp_path / name)
    for f in ("report.json", "report.txt", "outcomes.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.slow
def test_classifier_beats_retrieval_on_paraphrases():
    jaccard, *_ = run_experiment(ExperimentConfig("jaccard", str(PARAPHRASE)))
    bilstm, *_ = run_experiment(ExperimentConfig("bilstm", str(PARAPHRASE), classifier=ClassifierConfig.fixture()))
    assert bilstm.solution_accuracy >= jaccard.solution_accuracy
    assert bilstm.solution_accuracy <= bilstm.oracle_accuracy
