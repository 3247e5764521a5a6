import json

import pytest

from conftest import PARAPHRASE, RETRIEVAL, abstracted_splits
from mwp.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from mwp.harness import oracle_accuracy

ALIYAH_TEXT = (
    "Aliyah had some candy to give to her 3 children. She first took 2 pieces for herself and "
    "then evenly divided the rest among her children. Each child received 5 pieces. "
    "With how many pieces did she start?"
)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_templatize_worked_example(capsys):
    code, out, _ = run(capsys, "templatize", ALIYAH_TEXT, "2 + (3 * 5) = x")
    assert code == EXIT_OK
    assert out.splitlines() == ["B + ( A * C ) = x", "slots: A=3 B=2 C=5", "solution: x=17"]


def test_oracle_command(capsys):
    train, _, test = abstracted_splits(RETRIEVAL)
    code, out, _ = run(capsys, "oracle", "--data", RETRIEVAL)
    assert code == EXIT_OK
    assert f"oracle accuracy: {oracle_accuracy(train, test):.4f}" in out


def test_missing_dataset_is_a_data_error(capsys, tmp_path):
    missing = tmp_path / "none.jsonl"
    code, _, err = run(capsys, "train", "--solver", "jaccard", "--data", missing, "--out", tmp_path / "run")
    assert code == EXIT_DATA
    assert "data error" in err and str(missing) in err


def test_malformed_dataset_is_a_data_error(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{oops\n", encoding="utf-8")
    code, _, err = run(capsys, "oracle", "--data", bad)
    assert code == EXIT_DATA and "line 1" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--solver", "nope", "--data", "x"],
        ["frobnicate"],
        ["train", "--data", "x", "--set", "classifier.hidden_dim"],
        ["train", "--solver", "jaccard", "--data", "x", "--set", "classifier.colour=3"],
    ],
)
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as info:
        raise SystemExit(main(argv))
    assert info.value.code == EXIT_USAGE


def test_gradcheck(capsys):
    code, out, _ = run(capsys, "gradcheck", "--solver", "bilstm")
    assert code == EXIT_OK and out.splitlines()[-1].startswith("PASS")
    code, out, _ = run(capsys, "gradcheck", "--solver", "jaccard")
    assert code == EXIT_OK and "nothing to check" in out


def test_train_evaluate_solve(capsys, tmp_path):
    out_dir = tmp_path / "run"
    code, out, _ = run(capsys, "train", "--solver", "jaccard", "--data", RETRIEVAL, "--out", out_dir)
    assert code == EXIT_OK and "solution accuracy" in out
    trained = json.loads((out_dir / "report.json").read_text())

    code, out, _ = run(capsys, "evaluate", "--model", out_dir / "model.ckpt", "--data", RETRIEVAL, "--out", tmp_path / "ev")
    assert code == EXIT_OK
    evaluated = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert evaluated["solution_accuracy"] == trained["solution_accuracy"]
    assert evaluated["config_hash"] == trained["config_hash"]

    problems = tmp_path / "problems.jsonl"
    problems.write_text(json.dumps({"id": "q", "text": "Tom has 3 apples. He buys 5 more apples. How many apples?"}) + "\n")
    code, out, _ = run(capsys, "solve", problems, "--model", out_dir / "model.ckpt")
    assert code == EXIT_OK
    (line,) = out.splitlines()
    assert json.loads(line)["answers"] == [8.0]


@pytest.mark.parametrize("solver", ["jaccard", "bilstm"])
def test_train_is_deterministic(capsys, tmp_path, solver):
    args = ["train", "--solver", solver, "--data", PARAPHRASE, "--seed", 2, "--set", "classifier.epochs=3"]
    for name in ("a", "b"):
        assert run(capsys, *args, "--out", tmp_path / name)[0] == EXIT_OK
    for f in ("report.json", "outcomes.jsonl", "model.ckpt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_flags_override_config_file(capsys, tmp_path):
    config = tmp_path / "exp.cfg"
    config.write_text("# experiment\nsolver = jaccard\ndata = missing.jsonl\nseed = 9\n", encoding="utf-8")
    code, _, _ = run(capsys, "train", "--config", config, "--data", RETRIEVAL, "--seed", 1, "--out", tmp_path / "r")
    assert code == EXIT_OK
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["seed"] == 1 and report["solver"] == "jaccard"
