"""
End-to-end tests of the command-line surface through ``main``.
"""

import json

import numpy as np
import pandas as pd
import pytest

from vrex_mixup.cli import main
from vrex_mixup.cli.config_file import parse_config_text
from vrex_mixup.cli.manifest import MANIFEST_FILE, RunManifest
from vrex_mixup.engine import ops
from vrex_mixup.errors import ConfigError

TINY_TRAIN = ["--stage1-epochs", "2", "--stage2-epochs", "1", "--batch-size", "128",
              "--set", "model.hidden_dims=8"]


def _stdout_lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


def _relu_passing_every_gradient(a):
    return a.tape.record(np.where(a.value > 0, a.value, 0.0), (a,), lambda grad: (grad,))


@pytest.fixture
def data_dir(tmp_path, capsys):
    path = tmp_path / "data"
    assert main(["gen-data", "--out", str(path), "--seed", "0"]) == 0
    capsys.readouterr()
    return path


@pytest.fixture
def train_run(tmp_path, data_dir, capsys):
    out = tmp_path / "run"
    assert main(["train", "--data", str(data_dir), "--out", str(out), "--seed", "1"] + TINY_TRAIN) == 0
    return out, _stdout_lines(capsys)


class TestGenData:
    def test_default_counts(self, tmp_path, capsys):
        assert main(["gen-data", "--out", str(tmp_path / "d")]) == 0
        lines = _stdout_lines(capsys)
        assert lines[0] == "train_rows=1124 class0=560 class1=564"
        assert lines[1] == "val_rows=308 class0=180 class1=128"
        train = pd.read_csv(tmp_path / "d" / "train.csv")
        assert len(train) == 1124
        assert sorted(train["domain_id"].unique()) == [0, 1, 2, 3]
        assert (tmp_path / "d" / MANIFEST_FILE).exists()

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        for name in ("a", "b"):
            assert main(["gen-data", "--out", str(tmp_path / name), "--seed", "5"]) == 0
        for split in ("train.csv", "val.csv", "test.csv", MANIFEST_FILE):
            assert (tmp_path / "a" / split).read_bytes() == (tmp_path / "b" / split).read_bytes()

    def test_wrong_correlation_arity(self, tmp_path, capsys):
        code = main(["gen-data", "--out", str(tmp_path / "d"), "--train-correlations", "0.9,0.8,0.7"])
        assert code == 2
        assert "--train-correlations" in capsys.readouterr().err

    def test_invalid_probability(self, tmp_path):
        assert main(["gen-data", "--out", str(tmp_path / "d"), "--test-correlation", "1.5"]) == 2

    def test_fewer_environments(self, tmp_path, capsys):
        code = main(["gen-data", "--out", str(tmp_path / "d"), "--n-train-envs", "2",
                     "--train-correlations", "0.9,0.8"])
        assert code == 0
        assert _stdout_lines(capsys)[0].startswith("train_rows=1124 ")


class TestTrain:
    def test_stdout_contract(self, train_run):
        out, lines = train_run
        assert lines[-1].startswith("average_macro_f1=")
        assert lines[-2].startswith("test_macro_f1=")
        value = float(lines[-1].split("=", 1)[1])
        assert 0.0 <= value <= 1.0
        report = json.loads((out / "eval_val.json").read_text())
        assert report["average_macro_f1"] == value

    def test_artifacts_and_manifest(self, train_run):
        out, _ = train_run
        manifest = RunManifest.read(out)
        assert manifest.command == "train"
        assert manifest.seed == 1
        assert manifest.config["model"]["hidden_dims"] == [8]
        assert manifest.config["model"]["input_dim"] == 6
        for relative in manifest.artifacts.values():
            assert (out / relative).exists()
        assert "checkpoint_final" in manifest.artifacts

    def test_manifest_rerun_reproduces(self, tmp_path, train_run, capsys):
        out, lines = train_run
        assert main(["train", "--manifest", str(out / MANIFEST_FILE), "--out", str(tmp_path / "again")]) == 0
        assert _stdout_lines(capsys)[-1] == lines[-1]
        assert (out / "train_log.jsonl").read_bytes() == (tmp_path / "again" / "train_log.jsonl").read_bytes()

    def test_resume_keeps_log_and_records_source(self, tmp_path, data_dir, capsys):
        common = ["--data", str(data_dir), "--seed", "1"] + TINY_TRAIN + ["--set", "checkpoint_every=1"]
        full = tmp_path / "full"
        assert main(["train", "--out", str(full)] + common) == 0
        source = full / "checkpoints" / "stage1_epoch0001.json"
        resumed = tmp_path / "resumed"
        assert main(["train", "--out", str(resumed), "--resume", str(source)] + common) == 0
        assert (resumed / "train_log.jsonl").read_bytes() == (full / "train_log.jsonl").read_bytes()
        assert len((resumed / "train_log.jsonl").read_text().splitlines()) == 3
        manifest = RunManifest.read(resumed)
        assert manifest.resume == source.as_posix()
        assert RunManifest.read(full).resume is None
        for relative in manifest.artifacts.values():
            assert (resumed / relative).exists()

    def test_generates_data_when_none_given(self, tmp_path, capsys):
        out = tmp_path / "gen"
        assert main(["train", "--out", str(out), "--method", "erm"] + TINY_TRAIN) == 0
        assert (out / "data" / "train.csv").exists()
        log = [json.loads(line) for line in (out / "train_log.jsonl").read_text().splitlines()]
        assert {record["stage"] for record in log} == {"stage1"}
        assert all(record["lambda"] == 0.0 for record in log)

    def test_unknown_config_key(self, tmp_path, data_dir, capsys):
        config = tmp_path / "run.conf"
        config.write_text("# tiny run\nstage1_epochs = 1\nvrex.lamda = 3\n", encoding="utf-8")
        code = main(["train", "--data", str(data_dir), "--out", str(tmp_path / "x"), "--config", str(config)])
        assert code == 2
        assert "line 3" in capsys.readouterr().err

    def test_non_utf8_config_file(self, tmp_path, data_dir, capsys):
        config = tmp_path / "latin.conf"
        config.write_bytes(b"# r\xe9glage\nstage1_epochs = 1\n")
        code = main(["train", "--data", str(data_dir), "--out", str(tmp_path / "x"), "--config", str(config)])
        assert code == 2
        assert "not UTF-8" in capsys.readouterr().err

    def test_config_file_and_override_precedence(self, tmp_path, data_dir, capsys):
        config = tmp_path / "run.conf"
        config.write_text("stage1_epochs = 1\nstage2_epochs = 1\nbatch_size = 128\n"
                          "model.hidden_dims = 4\nvrex.lambda_max = 3\n", encoding="utf-8")
        out = tmp_path / "layered"
        code = main(["train", "--data", str(data_dir), "--out", str(out), "--config", str(config),
                     "--lambda-max", "4", "--set", "vrex.lambda_max=5"])
        assert code == 0
        assert RunManifest.read(out).config["vrex"]["lambda_max"] == 5.0


class TestEval:
    def test_matches_training_report(self, tmp_path, data_dir, train_run, capsys):
        out, lines = train_run
        code = main(["eval", "--checkpoint", str(out / "checkpoints" / "final.json"), "--data", str(data_dir),
                     "--out", str(tmp_path / "eval")])
        assert code == 0
        eval_lines = _stdout_lines(capsys)
        assert eval_lines[-1] == lines[-1]
        assert [line.split()[0] for line in eval_lines[:-1]] == [f"domain={k}" for k in range(4)]

    def test_pooled(self, tmp_path, data_dir, train_run, capsys):
        out, _ = train_run
        code = main(["eval", "--checkpoint", str(out / "checkpoints" / "final.json"), "--data", str(data_dir),
                     "--split", "test", "--pooled", "--out", str(tmp_path / "eval")])
        assert code == 0
        eval_lines = _stdout_lines(capsys)
        assert eval_lines[-2].startswith("pooled_macro_f1=")
        # a single test domain pools to itself
        assert eval_lines[-2].split("=")[1] == eval_lines[-1].split("=")[1]

    def test_feature_dim_mismatch(self, tmp_path, train_run, capsys):
        out, _ = train_run
        narrow = tmp_path / "narrow"
        assert main(["gen-data", "--out", str(narrow), "--n-invariant-dims", "3"]) == 0
        capsys.readouterr()
        code = main(["eval", "--checkpoint", str(out / "checkpoints" / "final.json"), "--data", str(narrow),
                     "--out", str(tmp_path / "eval")])
        assert code == 2
        err = capsys.readouterr().err
        assert "feature_dim 4" in err and "expects 6" in err

    def test_missing_checkpoint(self, tmp_path, data_dir):
        code = main(["eval", "--checkpoint", str(tmp_path / "none.json"), "--data", str(data_dir),
                     "--out", str(tmp_path / "eval")])
        assert code == 1


class TestGradcheck:
    def test_passes(self, capsys):
        assert main(["gradcheck", "--trials", "3"]) == 0
        assert _stdout_lines(capsys)[-1].startswith("gradcheck: all ")


    def test_injected_fault_exits_one(self, monkeypatch, capsys):
        monkeypatch.setattr(ops, "relu", _relu_passing_every_gradient)
        assert main(["gradcheck", "--trials", "3"]) == 1
        lines = _stdout_lines(capsys)
        assert any(line.startswith("relu ") and line.endswith("FAIL") for line in lines)
        assert lines[-1].startswith("gradcheck: ") and "relu" in lines[-1]



class TestReport:
    def test_writes_plot_ready_csvs(self, tmp_path, train_run, capsys):
        out, _ = train_run
        reports = tmp_path / "reports"
        assert main(["report", str(out), "--out", str(reports)]) == 0
        curves = pd.read_csv(reports / "curves.csv")
        assert list(curves["stage"]) == ["stage1", "stage1", "stage2"]
        assert {"run", "epoch", "mean_risk", "risk_variance", "lambda", "objective"} <= set(curves.columns)
        comparison = pd.read_csv(reports / "comparison.csv")
        assert "run_objective" in comparison.columns
        domains = pd.read_csv(reports / "domains.csv")
        assert set(domains["run"]) == {"run:test", "run:val"}

    def test_two_runs_side_by_side(self, tmp_path, data_dir, train_run, capsys):
        out, _ = train_run
        other = tmp_path / "other"
        assert main(["train", "--data", str(data_dir), "--out", str(other), "--seed", "2",
                     "--method", "erm"] + TINY_TRAIN) == 0
        capsys.readouterr()
        assert main(["report", str(out), str(other), "--out", str(tmp_path / "reports")]) == 0
        comparison = pd.read_csv(tmp_path / "reports" / "comparison.csv")
        # erm skips stage 2, so its columns are empty on the stage 2 row
        assert list(zip(comparison["stage"], comparison["epoch"])) == [("stage1", 0), ("stage1", 1), ("stage2", 0)]
        assert comparison["run_objective"].notna().all()
        assert comparison["other_objective"].notna().tolist() == [True, True, False]
        erm_log = [json.loads(line) for line in (other / "train_log.jsonl").read_text().splitlines()]
        assert comparison["other_objective"].iloc[1] == erm_log[1]["objective"]

    def test_non_utf8_log(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_bytes(b'{"epoch": 0, "stage": "stage\xff1"}\n')
        assert main(["report", str(bad), "--out", str(tmp_path / "r")]) == 2
        assert "line 1" in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        assert main(["report", str(tmp_path / "absent"), "--out", str(tmp_path / "r")]) == 2


class TestSweep:
    def test_tiny_sweep(self, tmp_path, data_dir, capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", "--data", str(data_dir), "--out", str(out), "--seeds", "0,1",
                     "--methods", "erm,vrex_mixup", "--jobs", "1"] + TINY_TRAIN)
        assert code == 0
        summary = pd.read_csv(out / "sweep_summary.csv")
        assert len(summary) == 4
        assert list(summary["method"]) == ["erm", "erm", "vrex_mixup", "vrex_mixup"]
        lines = _stdout_lines(capsys)
        assert lines[0].startswith("method=erm median_test_macro_f1=")

    def test_unknown_method(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path / "s"), "--methods", "irm"]) == 2


def test_config_text_rejects_line_without_equals():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("batch_size = 8\nstage1_epochs 3\n", ["batch_size", "stage1_epochs"])


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2
