from lorasb.cli import (
    EXIT_INPUT_ERROR, EXIT_OK, EXIT_PROPERTY_FAILURE, EXIT_RUN_ABORTED, budget_fraction, main, seed_list
)
from lorasb.core.defaults import (
    ABLATION_GRID_FILE, ABLATION_SUMMARY_FILE, CHECK_REPORT_FILE, ESTIMATE_DIR, MANIFEST_FILE, PARAMS_REPORT_FILE,
    RUN_TIMING_SUFFIX
)
from lorasb.core.errors import InvariantViolationError, RunAbortedError, SingularityError
from lorasb.oracles.suite import OracleResult
from lorasb.harness.checks import CheckReport

import argparse
import orjson
import pytest
import yaml

CONFIG = {
    "name": "cli",
    "task": {"m": 8, "n": 8, "r_true": 2, "num_samples": 16, "batch_size": 8},
    "arms": [{"method": "lora_sb", "recipe": {"kind": "lora_sb", "rank": 2}}],
    "train": {"eta": 1.0, "steps": 3},
    "seeds": [0]
}

@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(CONFIG))
    return path

class TestArgumentTypes:
    def test_seed_list(self):
        assert seed_list("0,1, 2") == [0, 1, 2]

    @pytest.mark.parametrize("value", ["", "a,b", "1;2"])
    def test_bad_seed_list(self, value):
        with pytest.raises(argparse.ArgumentTypeError):
            seed_list(value)

    @pytest.mark.parametrize("value", ["0", "1.5", "-0.1"])
    def test_bad_budget_fraction(self, value):
        with pytest.raises(argparse.ArgumentTypeError):
            budget_fraction(value)

    def test_budget_fraction(self):
        assert budget_fraction("1") == 1.0

class TestParams:
    def test_mistral_table(self, capsys):
        assert main(["params", "--layout", "mistral7b", "--method", "lora_xs", "--rank", "32", "64", "96"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "224 adapted modules" in out
        for formatted in ("0.23 M", "0.92 M", "2.06 M"):
            assert formatted in out

    def test_writes_json(self, tmp_path):
        assert main(["params", "--layout", "roberta-large", "--rank", "8", "--out", str(tmp_path)]) == EXIT_OK
        report = orjson.loads((tmp_path / PARAMS_REPORT_FILE).read_bytes())
        rows = {row["method"]: row for row in report["rows"]}
        assert rows["lora"]["formatted"] == "2162.69 K"
        assert rows["lora_xs"]["count"] == 6_144

    def test_unknown_layout(self):
        assert main(["params", "--layout", "no-such-model", "--rank", "8"]) == EXIT_INPUT_ERROR

    def test_rank_above_width(self):
        assert main(["params", "--layout", "roberta-large", "--rank", "100000"]) == EXIT_INPUT_ERROR

class TestCheck:
    def test_passing_suite(self, tmp_path, capsys):
        assert main(["check", "thm3", "--out", str(tmp_path)]) == EXIT_OK
        assert "[CHECK] thm3" in capsys.readouterr().out
        report = orjson.loads((tmp_path / CHECK_REPORT_FILE).read_bytes())
        assert report["suite"] == "thm3" and report["passed"] is True

    def test_failing_suite_exits_one(self, monkeypatch, capsys):
        failing = CheckReport(suite="thm1", seed=0, results=[OracleResult(name="thm1/x", deviation=1.0, tolerance=0.0)])
        monkeypatch.setattr("lorasb.cli.run_checks", lambda suite, seed: failing)
        assert main(["check", "thm1"]) == EXIT_PROPERTY_FAILURE
        assert "thm1/x" in capsys.readouterr().out

    def test_unknown_suite_is_usage_error(self):
        with pytest.raises(SystemExit) as e:
            main(["check", "nonexistent"])
        assert e.value.code == 2

class TestTrainAndEstimate:
    def test_train(self, config_path, tmp_path, capsys):
        out = tmp_path / "runs"
        assert main(["train", "--config", str(config_path), "--out", str(out), "--seed-list", "0,1"]) == EXIT_OK
        assert sorted(path.name for path in out.glob("*_seed?.json")) == [
            "lora_sb_lora_sb_corrected_seed0.json", "lora_sb_lora_sb_corrected_seed1.json"
        ]
        assert "median final loss" in capsys.readouterr().out
        assert len(list(out.glob(f"*{RUN_TIMING_SUFFIX}"))) == 2

    def test_strict_flag_reaches_trainer(self, config_path, tmp_path):
        assert main(["train", "--config", str(config_path), "--out", str(tmp_path), "--strict"]) == EXIT_OK
        summary = orjson.loads((tmp_path / "lora_sb_lora_sb_corrected_seed0.json").read_bytes())
        assert summary["config"]["strict"] is True

    def test_estimate(self, config_path, tmp_path):
        assert main(["estimate", "--config", str(config_path), "--out", str(tmp_path), "--budget-fraction", "1"]) == EXIT_OK
        manifest = orjson.loads((tmp_path / ESTIMATE_DIR / MANIFEST_FILE).read_bytes())
        assert manifest["samples_used"] == 16

    def test_ablate_with_budget_fraction(self, config_path, tmp_path, capsys):
        out = tmp_path / "ablate"
        assert main(["ablate", "--config", str(config_path), "--out", str(out), "--budget-fraction", "1"]) == EXIT_OK
        assert (out / ABLATION_GRID_FILE).exists()
        summary = orjson.loads((out / ABLATION_SUMMARY_FILE).read_bytes())
        assert summary["seeds"] == [0]
        printed = capsys.readouterr().out
        assert "kaiming_svd worst" in printed and "curve ahead of pissa_style" in printed

    def test_ablate_budget_fraction_reaches_estimate(self, config_path, tmp_path):
        out = tmp_path / "ablate"
        main(["ablate", "--config", str(config_path), "--out", str(out), "--budget-fraction", "1"])
        report = orjson.loads((out / "lora_sb_seed0.json").read_bytes())
        assert report["samples_used"] == 16

    def test_zero_steps_is_input_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_bytes(orjson.dumps({**CONFIG, "train": {"steps": 0}}))
        assert main(["train", "--config", str(path), "--out", str(tmp_path)]) == EXIT_INPUT_ERROR

    def test_missing_config_is_input_error(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "absent.json")]) == EXIT_INPUT_ERROR

    def test_bad_seed_list_is_usage_error(self, config_path):
        with pytest.raises(SystemExit) as e:
            main(["train", "--config", str(config_path), "--seed-list", "x"])
        assert e.value.code == 2

class TestErrorMapping:
    @pytest.mark.parametrize("error, code", [
        (RunAbortedError("boom", step=3), EXIT_RUN_ABORTED),
        (InvariantViolationError("bad subspace", step=1), EXIT_RUN_ABORTED),
        (SingularityError("singular"), EXIT_RUN_ABORTED),
    ])
    def test_run_failures(self, monkeypatch, config_path, tmp_path, error, code):
        def explode(*args, **kwargs):
            raise error
        monkeypatch.setattr("lorasb.cli.run_experiment", explode)
        assert main(["train", "--config", str(config_path), "--out", str(tmp_path)]) == code
