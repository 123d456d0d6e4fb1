import json
from pathlib import Path

import pytest

from pseudocpp import cli

FIXTURES = Path(__file__).parent / "fixtures"
SMOKE = FIXTURES / "smoke.tsv"


def run(*argv: str) -> int:
    return cli.main(list(argv))


def test_preprocess_writes_splits_and_stats(tmp_path, capsys):
    out = tmp_path / "corpus"
    code = run("preprocess", "--input", str(SMOKE), "--out", str(out), "--seed", "13")
    assert code == 0
    for name in ("train.jsonl", "valid.jsonl", "test.jsonl", "stats.json", "run-config.json"):
        assert (out / name).exists()
    stats = json.loads((out / "stats.json").read_text())
    assert stats["programs"] == 20 and stats["problems"] == 5
    assert "programs over" in capsys.readouterr().out


def test_preprocess_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("preprocess", "--input", str(SMOKE), "--out", str(a), "--seed", "4") == 0
    assert run("preprocess", "--input", str(SMOKE), "--out", str(b), "--seed", "4") == 0
    for name in ("train.jsonl", "valid.jsonl", "test.jsonl", "stats.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_preprocess_missing_column_exits_2(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("text\tcode\nx\ty\n", encoding="utf-8")
    assert run("preprocess", "--input", str(bad), "--out", str(tmp_path / "o")) == 2


def test_preprocess_missing_file_exits_2(tmp_path):
    assert run("preprocess", "--input", str(tmp_path / "nope.tsv"), "--out", str(tmp_path)) == 2


def test_preprocess_all_in_train(tmp_path):
    out = tmp_path / "corpus"
    assert run("preprocess", "--input", str(SMOKE), "--out", str(out), "--split", "1,0,0") == 0
    train = (out / "train.jsonl").read_text().strip().splitlines()
    assert len(train) == 20
    assert (out / "valid.jsonl").read_text() == ""


def test_build_vocab(tmp_path):
    out = tmp_path / "corpus"
    run("preprocess", "--input", str(SMOKE), "--out", str(out), "--split", "1,0,0")
    assert run("build-vocab", "--data", str(out)) == 0
    vocab = json.loads((out / "tgt_vocab.json").read_text())
    assert set(vocab) == {"specials", "tokens"}
    assert len(vocab["specials"]) == 4


def test_evaluate_identity_table(tmp_path, capsys):
    programs = ["int main (){\nint a = 1;\ncin >> a;\ncout << a;\n}"] * 2
    cands = tmp_path / "c.jsonl"
    cands.write_text(
        "\n".join(json.dumps({"id": str(i), "code": p}) for i, p in enumerate(programs)) + "\n"
    )
    report_path = tmp_path / "report.json"
    code = run(
        "evaluate", "--candidates", str(cands), "--references", str(cands),
        "--out", str(report_path), "--table",
    )
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["means"]["codebleu"] == 1.0
    table = capsys.readouterr().out
    assert "CodeBLEU" in table and "1.0000" in table


def test_evaluate_debug_trees(tmp_path):
    program = "int main (){\nint a = 1;\ncin >> a;\ncout << a;\n}"
    cands = tmp_path / "c.jsonl"
    cands.write_text(json.dumps({"id": "p", "code": program}) + "\n")
    trees_path = tmp_path / "trees.jsonl"
    code = run(
        "evaluate", "--candidates", str(cands), "--references", str(cands),
        "--out", str(tmp_path / "r.json"), "--debug-trees", str(trees_path),
    )
    assert code == 0
    record = json.loads(trees_path.read_text().splitlines()[0])
    assert record["id"] == "p"
    for side in ("candidate", "reference"):
        assert record[side]["ast"]["kind"] == "TranslationUnit"
        assert record[side]["dataflow"]["edges"]
        assert "span" in record[side]["ast"]


def test_evaluate_length_mismatch_exits_2(tmp_path):
    one = tmp_path / "one.jsonl"
    two = tmp_path / "two.jsonl"
    one.write_text(json.dumps({"code": "int a;"}) + "\n")
    two.write_text(json.dumps({"code": "int a;"}) + "\n" + json.dumps({"code": "int b;"}) + "\n")
    assert run("evaluate", "--candidates", str(one), "--references", str(two)) == 2


def test_generate_text_mode(tmp_path, capsys, single_pair_checkpoint, single_pair_setup):
    code = run(
        "generate", "--checkpoint", str(single_pair_checkpoint),
        "--text", single_pair_setup["pair"].pseudocode,
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "#include <iostream>" in out


def test_generate_requires_an_input_mode(single_pair_checkpoint):
    assert run("generate", "--checkpoint", str(single_pair_checkpoint)) == 2


def test_generate_missing_checkpoint_exits_2(tmp_path):
    assert run("generate", "--checkpoint", str(tmp_path / "no.npz"), "--text", "x") == 2


def test_train_self_check_failure_exits_3(tmp_path, monkeypatch):
    out = tmp_path / "corpus"
    run("preprocess", "--input", str(SMOKE), "--out", str(out), "--split", "1,0,0")

    def broken(*args, **kwargs):
        raise cli.SelfCheckError("forced")

    monkeypatch.setattr(cli, "_self_check", broken)
    code = run(
        "train", "--data", str(out), "--out", str(tmp_path / "run"),
        "--self-check", "--epochs", "1",
    )
    assert code == 3


def test_search_emits_requested_trial_rows(tmp_path):
    out = tmp_path / "corpus"
    run("preprocess", "--input", str(SMOKE), "--out", str(out), "--split", "0.6,0.2,0.2", "--seed", "2")
    run_dir = tmp_path / "search"
    code = run(
        "search", "--data", str(out), "--out", str(run_dir),
        "--iterations", "2", "--trial-epochs", "1",
        "--layers-range", "1,1", "--d-model-choices", "8", "--dropout-range", "0,0",
        "--num-heads", "2", "--d-ff", "16", "--batch-size", "8",
    )
    assert code == 0
    trials = json.loads((run_dir / "search.json").read_text())
    assert len(trials) == 2
    assert trials[0]["val_loss"] <= trials[1]["val_loss"]
    assert {"config", "val_loss", "parameters", "order"} <= set(trials[0])


def test_stats_with_svg(tmp_path):
    out = tmp_path / "stats"
    assert run("stats", "--input", str(SMOKE), "--out", str(out), "--svg") == 0
    stats = json.loads((out / "stats.json").read_text())
    assert stats["programs"] == 20
    svg = (out / "histogram.svg").read_text()
    assert svg.startswith("<svg") and "rect" in svg


def test_config_file_merging(tmp_path):
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"split": [1, 0, 0], "seed": 9}))
    out = tmp_path / "corpus"
    assert run("preprocess", "--input", str(SMOKE), "--out", str(out), "--config", str(config)) == 0
    run_config = json.loads((out / "run-config.json").read_text())
    assert run_config["options"]["split"] == [1, 0, 0]
    assert run_config["options"]["seed"] == 9
    assert len((out / "train.jsonl").read_text().strip().splitlines()) == 20


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"seed": 9}))
    out = tmp_path / "corpus"
    assert run(
        "preprocess", "--input", str(SMOKE), "--out", str(out),
        "--config", str(config), "--seed", "4",
    ) == 0
    run_config = json.loads((out / "run-config.json").read_text())
    assert run_config["options"]["seed"] == 4
