import hashlib
import json
import os

import pytest
from click.testing import CliRunner

from tutorgraph.cli import main
from tutorgraph.config import ENV_CONFIG

from conftest import EVAL_PATH, FIRST_ATTEMPT, FIRST_MESSAGE, fixture_config

BUILD_CHAIN = (["ingest"], ["build-graphs"], ["gen-triplets"], ["train"])


def _write_config(tmp_path, **overrides):
    config = fixture_config(str(tmp_path / "artifacts"))
    for key, value in overrides.items():
        setattr(config, key, value)
    path = tmp_path / "config.json"
    config.save(str(path))
    return str(path), config


def _tree_digest(root):
    digests = {}
    for dirpath, _, filenames in os.walk(root):
        for name in filenames:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as fh:
                digests[os.path.relpath(path, root)] = hashlib.sha256(fh.read()).hexdigest()
    return digests


def _run(runner, config_path, args):
    result = runner.invoke(main, ["--config", config_path, *args])
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """One full CLI build chain, shared by the read-only command tests."""
    tmp_path = tmp_path_factory.mktemp("cli")
    config_path, config = _write_config(tmp_path)
    runner = CliRunner()
    for verb in BUILD_CHAIN:
        _run(runner, config_path, verb)
    return runner, config_path, config


class TestBuildChain:
    def test_ingest_reports_counts(self, chain):
        runner, config_path, _ = chain
        result = _run(runner, config_path, ["ingest"])
        assert "ml-task\treference=3\tstudent=3" in result.output
        assert "3 exercises, 16 solutions" in result.output

    def test_build_graphs_reports_shapes(self, chain):
        runner, config_path, _ = chain
        result = _run(runner, config_path, ["build-graphs"])
        assert "ml-task\tnodes=2\tedges=1" in result.output

    def test_artifacts_written(self, chain):
        _, _, config = chain
        for rel in (
            "exercises.json",
            "exercise_index.json",
            "relations.json",
            "classifier.json",
            "metrics.json",
            "config_snapshot.json",
            os.path.join("graphs", "ml-task.json"),
            os.path.join("samples", "train.tsv"),
        ):
            assert os.path.exists(os.path.join(config.artifacts_dir, rel)), rel

    def test_rerun_is_byte_identical(self, chain):
        runner, config_path, config = chain
        before = _tree_digest(config.artifacts_dir)
        assert before
        for verb in BUILD_CHAIN:
            _run(runner, config_path, verb)
        assert _tree_digest(config.artifacts_dir) == before


class TestFeedbackCommand:
    def test_prints_worked_example_message(self, chain):
        runner, config_path, _ = chain
        result = _run(
            runner,
            config_path,
            ["feedback", "--exercise", "ml-task", "--text", FIRST_ATTEMPT],
        )
        assert result.output.strip() == FIRST_MESSAGE

    def test_json_payload(self, chain):
        runner, config_path, _ = chain
        result = _run(
            runner,
            config_path,
            ["feedback", "--exercise", "ml-task", "--text", FIRST_ATTEMPT, "--json"],
        )
        payload = json.loads(result.output)
        assert payload["message"] == FIRST_MESSAGE
        assert payload["diagnosis"]["kind"] == "Missing"

    def test_mode_choice_validated(self, chain):
        runner, config_path, _ = chain
        result = runner.invoke(
            main,
            ["--config", config_path, "feedback", "--exercise", "ml-task", "--text", "x", "--mode", "loud"],
        )
        assert result.exit_code != 0

    def test_unknown_exercise_fails_cleanly(self, chain):
        runner, config_path, _ = chain
        result = runner.invoke(
            main,
            ["--config", config_path, "feedback", "--exercise", "ghost", "--text", "x"],
        )
        assert result.exit_code == 1
        assert "unknown exercise" in result.output

    def test_missing_artifacts_fail_cleanly(self, tmp_path):
        config_path, _ = _write_config(tmp_path)
        result = CliRunner().invoke(
            main,
            ["--config", config_path, "feedback", "--exercise", "ml-task", "--text", "x"],
        )
        assert result.exit_code == 1
        assert "missing artifact" in result.output


class TestEvalCommand:
    def test_writes_report_and_figures(self, chain, tmp_path):
        runner, config_path, _ = chain
        out_dir = str(tmp_path / "eval-out")
        result = _run(
            runner, config_path, ["eval", "--eval-file", EVAL_PATH, "--out", out_dir]
        )
        assert "full\tattempts=6\tmost_frequent=Missing" in result.output
        assert os.path.exists(os.path.join(out_dir, "report.tsv"))
        assert os.path.exists(os.path.join(out_dir, "summary.json"))
        assert os.path.exists(os.path.join(out_dir, "diagnosis_distribution.png"))
        assert os.path.exists(os.path.join(out_dir, "top_scores.png"))

    def test_empty_eval_file_fails(self, chain, tmp_path):
        runner, config_path, _ = chain
        empty = tmp_path / "empty.tsv"
        empty.write_text("")
        result = runner.invoke(
            main, ["--config", config_path, "eval", "--eval-file", str(empty)]
        )
        assert result.exit_code == 1
        assert "empty" in result.output


class TestConfigResolution:
    def test_env_var_supplies_config_path(self, tmp_path, monkeypatch):
        config_path, _ = _write_config(tmp_path)
        monkeypatch.setenv(ENV_CONFIG, config_path)
        result = CliRunner().invoke(main, ["ingest"])
        assert result.exit_code == 0, result.output
        assert "3 exercises" in result.output

    def test_broken_config_file_fails_cleanly(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        result = CliRunner().invoke(main, ["--config", str(bad), "ingest"])
        assert result.exit_code == 1
        assert "invalid JSON" in result.output

    def test_unknown_key_fails_cleanly(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"epss": 0.2}))
        result = CliRunner().invoke(main, ["--config", str(bad), "ingest"])
        assert result.exit_code == 1
        assert "unknown config keys" in result.output
