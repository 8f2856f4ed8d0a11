import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from infilling.cli import main
from infilling.synth import generate_corpus, write_corpus


def tiny_config(corpus_dir: Path) -> dict:
    return {
        "seed": 5,
        "corpus": {
            "train_path": str(corpus_dir / "train.jsonl"),
            "val_path": str(corpus_dir / "val.jsonl"),
            "test_path": str(corpus_dir / "test.jsonl"),
            "format": "jsonl",
        },
        "mask": {"subtree_prob": 0.1},
        "vocab": {"target_size": 400},
        "model": {"n_layers": 1, "n_heads": 2, "d_model": 32, "d_ff": 64},
        "train": {"batch_size": 8, "max_steps": 30, "warmup_steps": 5,
                  "eval_every": 1000},
        "eval": {"granularities": ["sentence"], "mixture": False},
        "decode": {"method": "greedy", "max_new_tokens": 16},
    }


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus_dir = root / "corpus"
    corpus_dir.mkdir()
    stories = generate_corpus(36, seed=4)
    for split, lo, hi in (("train", 0, 24), ("val", 24, 30), ("test", 30, 36)):
        path = corpus_dir / f"{split}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for i, text in enumerate(stories[lo:hi]):
                fh.write(json.dumps({"id": f"{split}-{i}", "text": text,
                                     "has_meta": True}) + "\n")
    config_path = root / "run.json"
    config_path.write_text(json.dumps(tiny_config(corpus_dir)), encoding="utf-8")
    return {"root": root, "config": str(config_path), "out": str(root / "out")}


def run_ok(args):
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def test_synth_corpus_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run_ok(["synth-corpus", "--out", str(a), "--n-docs", "10", "--seed", "3"])
    run_ok(["synth-corpus", "--out", str(b), "--n-docs", "10", "--seed", "3"])
    assert a.read_bytes() == b.read_bytes()


def test_ingest(workspace):
    result = run_ok(["ingest", "--config", workspace["config"],
                     "--out-dir", workspace["out"]])
    summary = json.loads((Path(workspace["out"]) / "corpus_summary.json").read_text())
    assert summary["train"]["documents"] == 24
    assert summary["test"]["documents"] == 6
    assert "train" in result.output


def test_ingest_rejects_unknown_config_key(workspace, tmp_path):
    cfg = json.loads(Path(workspace["config"]).read_text())
    cfg["modle"] = {}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cfg))
    result = CliRunner().invoke(
        main, ["ingest", "--config", str(bad), "--out-dir", str(tmp_path / "o")]
    )
    assert result.exit_code == 1
    assert "ConfigInvalid" in result.output
    assert "modle" in result.output


def test_train_vocab(workspace):
    result = run_ok(["train-vocab", "--config", workspace["config"],
                     "--out-dir", workspace["out"]])
    assert (Path(workspace["out"]) / "vocab.json").exists()
    assert "fingerprint" in result.output


def test_make_examples(workspace):
    result = run_ok(["make-examples", "--config", workspace["config"],
                     "--out-dir", workspace["out"]])
    summary = json.loads(result.output)
    counts = set(summary["train"].values())
    assert len(counts) == 1, "all strategies must cover the same documents"
    for strategy in ("ILM", "LM", "LMREV", "LMALL"):
        assert (Path(workspace["out"]) / "datasets" / "train" / strategy
                / "records.bin").exists()


def test_train_single_strategy(workspace):
    result = run_ok(["train", "--config", workspace["config"],
                     "--out-dir", workspace["out"], "--strategy", "ILM"])
    assert "ILM: trained" in result.output
    assert (Path(workspace["out"]) / "checkpoints" / "ILM.pt").exists()
    log = (Path(workspace["out"]) / "logs" / "ILM.jsonl").read_text().splitlines()
    assert all("loss" in json.loads(line) for line in log)


def test_train_remaining_and_eval(workspace):
    for strategy in ("LM", "LMREV", "LMALL"):
        run_ok(["train", "--config", workspace["config"],
                "--out-dir", workspace["out"], "--strategy", strategy])
    result = run_ok(["eval", "--config", workspace["config"],
                     "--out-dir", workspace["out"]])
    assert "ILM" in result.output and "sentence" in result.output
    report = json.loads((Path(workspace["out"]) / "eval_report.json").read_text())
    assert "ILM/sentence" in report and "LM/sentence" in report


def test_infill_command(workspace):
    result = run_ok(["infill", "--config", workspace["config"],
                     "--out-dir", workspace["out"],
                     "--text", "One morning, Mia found a [blank:word] lantern."])
    assert "[blank" not in result.output.splitlines()[0] or "truncated" in result.output


def test_infill_reports_missing_checkpoint(workspace, tmp_path):
    result = CliRunner().invoke(
        main, ["infill", "--config", workspace["config"],
               "--out-dir", str(tmp_path / "nothing"), "--text", "a [blank] b"]
    )
    assert result.exit_code == 1
    assert "error:" in result.output
