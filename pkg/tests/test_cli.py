from __future__ import annotations

import json
import os

import pytest
from click.testing import CliRunner

from schemadialog.cli import main

from conftest import FIXTURES, MINIMAL_SCHEMA


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic corpus + schemas generated through the CLI itself."""
    root = tmp_path_factory.mktemp("cli_ws")
    config = {"tasks": 4, "domains": 2, "dialogs_per_task": 8}
    cfg_path = root / "synth.json"
    cfg_path.write_text(json.dumps(config))
    out = root / "data"
    result = CliRunner().invoke(
        main,
        ["generate-synthetic", "--config", str(cfg_path), "--seed", "3", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    return root, out


TINY_TRAIN_CONFIG = {
    "epochs": 2,
    "batch_size": 8,
    "learning_rate": 3e-3,
    "dim": 16,
    "layers": 1,
    "heads": 2,
    "ffn_dim": 32,
    "max_positions": 64,
    "max_context_tokens": 40,
    "vocab_size": 500,
}


class TestValidateSchema:
    def test_good_schema(self, runner, tmp_path):
        path = tmp_path / "good.json"
        path.write_text(MINIMAL_SCHEMA)
        result = runner.invoke(main, ["validate-schema", str(path)])
        assert result.exit_code == 0
        assert "ok" in result.output

    def test_bad_schema_exit_one_with_rule(self, runner, tmp_path):
        doc = json.loads(MINIMAL_SCHEMA)
        doc["nodes"].append(
            {"id": "ask2", "kind": "system", "text": "Age?", "action": "ask_age"}
        )
        doc["edges"].append(["u_hi", "ask2"])
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        result = runner.invoke(main, ["validate-schema", str(path)])
        assert result.exit_code == 1
        assert "determinism/outgoing" in result.output

    def test_usage_error_exit_two(self, runner):
        result = runner.invoke(main, ["validate-schema"])
        assert result.exit_code == 2


class TestGenerateSynthetic:
    def test_outputs(self, workspace):
        _, out = workspace
        assert (out / "corpus.json").exists()
        schemas = list((out / "schemas").glob("*.json"))
        assert len(schemas) == 4

    def test_deterministic(self, runner, tmp_path):
        for d in ("a", "b"):
            result = runner.invoke(
                main, ["generate-synthetic", "--seed", "7", "--out", str(tmp_path / d)]
            )
            assert result.exit_code == 0
        a = (tmp_path / "a" / "corpus.json").read_bytes()
        b = (tmp_path / "b" / "corpus.json").read_bytes()
        assert a == b


class TestTrainEval:
    def test_train_then_eval(self, runner, workspace, tmp_path):
        root, out = workspace
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps(TINY_TRAIN_CONFIG))
        run_dir = tmp_path / "run"
        result = runner.invoke(
            main,
            [
                "train",
                "--corpus", str(out / "corpus.json"),
                "--schemas", str(out / "schemas"),
                "--config", str(cfg),
                "--seed", "13",
                "--out", str(run_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        model_path = run_dir / "model.ckpt"
        assert model_path.exists()

        result = runner.invoke(
            main,
            [
                "eval",
                "--corpus", str(out / "corpus.json"),
                "--schemas", str(out / "schemas"),
                "--model", str(model_path),
                "--seed", "13",
            ],
        )
        assert result.exit_code == 0, result.output
        metrics = json.loads(result.output)
        assert 0.0 <= metrics["weighted_f1"] <= 1.0

    def test_train_baseline_flag(self, runner, workspace, tmp_path):
        root, out = workspace
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps(TINY_TRAIN_CONFIG))
        result = runner.invoke(
            main,
            [
                "train",
                "--corpus", str(out / "corpus.json"),
                "--schemas", str(out / "schemas"),
                "--config", str(cfg),
                "--flags", "baseline",
                "--epochs", "1",
                "--out", str(tmp_path / "b_run"),
            ],
        )
        assert result.exit_code == 0, result.output


class TestTransfer:
    def test_task_transfer_writes_report(self, runner, workspace, tmp_path):
        root, out = workspace
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps({**TINY_TRAIN_CONFIG, "epochs": 1}))
        report_dir = tmp_path / "rep"
        result = runner.invoke(
            main,
            [
                "transfer",
                "--corpus", str(out / "corpus.json"),
                "--schemas", str(out / "schemas"),
                "--holdout-kind", "task",
                "--rows", "sam",
                "--seeds", "3",
                "--config", str(cfg),
                "--out", str(report_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((report_dir / "report.json").read_text())
        assert report["kind"] == "task_transfer"
        assert "sam" in report["rows"]
        assert (report_dir / "report.txt").exists()


class TestChat:
    def test_chat_repl(self, runner, workspace, tmp_path):
        root, out = workspace
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps(TINY_TRAIN_CONFIG))
        run_dir = tmp_path / "chat_run"
        result = runner.invoke(
            main,
            [
                "train",
                "--corpus", str(out / "corpus.json"),
                "--schemas", str(out / "schemas"),
                "--config", str(cfg),
                "--out", str(run_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        task = sorted(os.listdir(out / "schemas"))[0][:-5]
        result = runner.invoke(
            main,
            [
                "chat",
                "--task", task,
                "--model", str(run_dir / "model.ckpt"),
                "--schemas", str(out / "schemas"),
            ],
            input="hello , i need help please .\n\n",
        )
        assert result.exit_code == 0, result.output
        assert "SYSTEM" in result.output
        assert "aligned" in result.output


class TestImportStar:
    def test_import(self, runner, tmp_path):
        out_path = tmp_path / "converted.json"
        result = runner.invoke(
            main,
            ["import-star", os.path.join(FIXTURES, "star_export.json"),
             "--out", str(out_path)],
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads(result.output)
        # happy single-task dialog kept; multi-task and unhappy skipped
        assert manifest["dialogs"] == 1
        assert manifest["skipped"] == 2
        assert manifest["system_turns"] == 4
        assert manifest["total_turns"] == 9
        from schemadialog.corpus import load_corpus

        corpus = load_corpus(out_path.read_text())
        assert corpus.dialogs[0].task_id == "bank_balance"
