"""Freeze outputs of the untrained seeded regression models into tests/golden/.

Run once after an intentional change to initialisation or model code:

    python scripts/make_golden.py
"""
import json
from pathlib import Path

from mwp.diagnostics import regression_classifier, regression_seq2seq
from mwp.harness import load_dataset, make_splits
from mwp.seq2seq import encode_source
from mwp.text import abstract_problem

ROOT = Path(__file__).resolve().parents[1]
FIXTURE = ROOT / "src" / "mwp" / "data" / "paraphrase_fixture.jsonl"
OUT = ROOT / "tests" / "golden"


def main():
    raws, _ = load_dataset(FIXTURE)
    train, _, test = ([abstract_problem(r) for r in s.problems] for s in make_splits(raws))
    probe = test[0]
    golden = {"problem": probe.id, "tokens": list(probe.tokens)}
    for kind in ("bilstm", "self_attn"):
        golden[kind] = regression_classifier(kind, train).classify(probe.tokens).tolist()
    s2s = regression_seq2seq(train)
    golden["seq2seq_encoder_states"] = encode_source(s2s, probe.tokens).tolist()
    golden["seq2seq_greedy"] = s2s.greedy_decode(probe.tokens, max_len=12).tokens
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "untrained_seed0.json").write_text(json.dumps(golden, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {OUT / 'untrained_seed0.json'}")


if __name__ == "__main__":
    main()
