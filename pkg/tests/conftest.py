import os
from pathlib import Path

import pytest

from mwp.harness import load_dataset, make_splits
from mwp.text import abstract_problem

DATA = Path(__file__).resolve().parents[1] / "src" / "mwp" / "data"
PARAPHRASE = DATA / "paraphrase_fixture.jsonl"
RETRIEVAL = DATA / "retrieval_fixture.jsonl"


def abstracted_splits(path):
    raws, _ = load_dataset(path)
    return tuple([abstract_problem(r) for r in s.problems] for s in make_splits(raws))


@pytest.fixture(scope="session")
def paraphrase_splits():
    return abstracted_splits(PARAPHRASE)


@pytest.fixture(scope="session")
def retrieval_splits():
    return abstracted_splits(RETRIEVAL)


@pytest.fixture
def glove_file(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("apples 1.0 0.0\npears 0.0 1.0\nhas 0.5 0.5\n<slot> 0.1 0.2\n", encoding="utf-8")
    return path


# -- acceptance reporting

ACCEPTANCE_LINES: list[str] = []


def pytest_addoption(parser):
    parser.addoption("--math23k", default=None, help="Math23K-format file for the conditional dataset check")


@pytest.fixture
def math23k_path(request):
    return request.config.getoption("--math23k") or os.environ.get("MWP_MATH23K")


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def check(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
