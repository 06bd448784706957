#!/usr/bin/env python3
"""
Command-Line Tests
Stage commands end to end on a small corpus, exit codes and artifact stability.
"""

import json
from pathlib import Path

import pytest

from kinspike.analysis.confusion import ConfusionMatrix
from kinspike.config import OUTPUT_DIR_ENV
from kinspike.errors import (
    ConfigError,
    ConversionError,
    DependencyError,
    FormatError,
    InputError,
    NumericError,
    SchemaError,
)
from kinspike.orchestration.acceptance import artifact_digests
from kinspike.orchestration.cli import main, split_dotted


@pytest.fixture
def cli(tmp_path, small_config, capsys, monkeypatch):
    """Run the CLI against the small configuration; returns (exit code, parsed stdout)."""
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    config_file = small_config.save(tmp_path / "run.ini")

    def run(*args):
        code = main(["--config", str(config_file), *args])
        out = capsys.readouterr().out
        return code, (json.loads(out) if code == 0 and out.strip().startswith("{") else out)

    return run


class TestSplitDotted:
    def test_space_and_equals_forms(self):
        overrides, rest = split_dotted(["--train.max_epochs", "3", "--snn.steps=80", "train", "--kind", "CNN"])
        assert overrides == ["train.max_epochs=3", "snn.steps=80"]
        assert rest == ["train", "--kind", "CNN"]

    def test_missing_value_is_a_config_error(self):
        assert main(["--train.max_epochs"]) == 2


class TestExitCodes:
    def test_unknown_command(self):
        assert main(["bake"]) == 2

    def test_invalid_override(self, cli):
        code, _ = cli("--model.kind", "RNN", "gen")
        assert code == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["--config", str(tmp_path / "absent.ini"), "gen"]) == 2

    def test_encode_before_gen(self, cli):
        code, _ = cli("encode")
        assert code == 3

    def test_train_before_encode(self, cli):
        assert cli("gen")[0] == 0
        code, _ = cli("train")
        assert code == 3

    def test_convert_before_train(self, cli):
        cli("gen")
        cli("encode")
        code, _ = cli("convert")
        assert code == 3

    def test_corrupt_model_file(self, cli):
        cli("gen")
        cli("encode")
        _, trained = cli("train")
        model = Path(trained["model"])
        model.write_text(model.read_text()[:40])
        code, _ = cli("eval")
        assert code == 6

    def test_error_families_have_distinct_codes(self):
        assert SchemaError.exit_code == InputError.exit_code == ConversionError("dense1").exit_code == 5
        assert FormatError.exit_code == 6
        codes = [ConfigError.exit_code, DependencyError.exit_code, NumericError.exit_code, InputError.exit_code,
                 FormatError.exit_code]
        assert len(set(codes)) == len(codes)


class TestStages:
    def test_gen_writes_every_cell(self, cli, small_config):
        code, result = cli("gen")
        assert code == 0
        assert result["log_count"] == 48
        manifest = json.loads((small_config.output_dir / "manifest.json").read_text())
        assert len(manifest) == 48
        assert (small_config.output_dir / "validation.json").exists()

    def test_dotted_flag_overrides_file(self, cli):
        code, result = cli("--dataset.reps_per_cell=2", "gen")
        assert code == 0
        assert result["log_count"] == 32

    def test_encode_summary(self, cli, small_config):
        cli("gen")
        code, result = cli("encode")
        assert code == 0
        assert result["mode"] == "event"
        assert result["event_sparsity"] < result["raw_nonzero_fraction"]
        for name in ("thresholds.json", "split.json"):
            assert (small_config.output_dir / name).exists()

    def test_eval_reproduces_training_accuracy(self, cli, small_config):
        cli("gen")
        cli("encode")
        code, trained = cli("train")
        assert code == 0
        assert trained["model"].endswith("FCN-task-event.json")
        code, evaluated = cli("eval")
        assert code == 0
        assert evaluated["accuracy"] == trained["best_test_accuracy"]
        report = json.loads(Path(evaluated["report"]).read_text())
        matrix = ConfusionMatrix.read_csv(small_config.output_dir / "reports" / "FCN-task-event" / "confusion.csv")
        assert matrix.total == report["windows"]
        assert matrix.accuracy == pytest.approx(report["accuracy"])

    def test_convert_and_spiking_eval(self, cli):
        cli("gen")
        cli("encode")
        cli("train")
        code, converted = cli("convert")
        assert code == 0
        assert converted["hybrid"] is False
        assert converted["snn"].endswith("FCN-task-event.snn.json")
        code, evaluated = cli("eval", "--spiking")
        assert code == 0
        assert 0.0 <= evaluated["accuracy"] <= 1.0

    def test_operator_target(self, cli):
        cli("gen")
        cli("encode")
        code, trained = cli("train", "--target", "operator")
        assert code == 0
        assert trained["model"].endswith("FCN-operator-event.json")

    def test_embed(self, cli, small_config):
        cli("gen")
        cli("encode")
        cli("train")
        code, result = cli("embed")
        assert code == 0
        assert result["kl_final"] >= 0.0
        assert (small_config.output_dir / "reports" / "FCN-task-event" / "embedding.svg").exists()

    def test_ablate(self, cli, small_config):
        cli("gen")
        code, result = cli("ablate")
        assert code == 0
        assert result["rows"] == 2
        ablation = small_config.output_dir / "ablation"
        assert (ablation / "ablation.csv").read_text().splitlines()[0].startswith("feature_index,feature,")
        assert (ablation / "ablation.svg").exists()


class TestIdempotence:
    def test_rerun_gives_identical_artifacts(self, cli, small_config):
        for command in ("gen", "encode", "train", "eval"):
            assert cli(command)[0] == 0
        first = artifact_digests(small_config.output_dir)
        for command in ("gen", "encode", "train", "eval"):
            assert cli(command)[0] == 0
        assert artifact_digests(small_config.output_dir) == first
