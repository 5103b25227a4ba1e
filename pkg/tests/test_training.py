"""
Tests for the optimizers, checkpoints, training config, logs and the two-stage loop.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from vrex_mixup.data import epoch_seed, stratified_batches
from vrex_mixup.engine import Tape, reduce_mean, stack
from vrex_mixup.errors import CheckpointError, ConfigError, DataFormatError, ShapeError, ValidationError
from vrex_mixup.model import ModelParams, bind_params, init_params
from vrex_mixup.objectives import MixupConfig, per_environment_risks
from vrex_mixup.training import (
    Checkpoint, EarlyStopper, EpochRecord, OptimizerConfig, TrainConfig, TrainLog, apply_method,
    coerce_value, from_flat, init_optimizer_state, load_checkpoint, optimizer_config, optimizer_step,
    run_two_stage, save_checkpoint, seeded, train_stage1_vrex, train_stage2_mixup,
)


def _scalar_params(value):
    return ModelParams([(np.array([[value]]), np.array([0.0]))])


def _grads(weight, bias=0.0):
    return {"layers.0.weight": np.array([[weight]]), "layers.0.bias": np.array([bias])}


def _same_params(a, b):
    return all(np.array_equal(x, y) for x, y in zip(
        [t for pair in a.layers for t in pair], [t for pair in b.layers for t in pair]))


class TestOptimizer:
    def test_sgd_one_step(self):
        params = _scalar_params(1.0)
        updated, state = optimizer_step(params, _grads(0.5), init_optimizer_state(params),
                                        OptimizerConfig("sgd", lr=0.1))
        assert updated.layers[0][0][0, 0] == 0.95
        assert state.step == 1

    def test_adam_first_step(self):
        params = _scalar_params(1.0)
        updated, state = optimizer_step(params, _grads(0.5), init_optimizer_state(params),
                                        OptimizerConfig("adam", lr=0.001))
        assert abs((updated.layers[0][0][0, 0] - 1.0) + 0.001) < 1e-6
        assert state.first_moment["layers.0.weight"][0, 0] == pytest.approx(0.05)

    def test_zero_gradients_are_a_fixed_point(self):
        params = _scalar_params(2.0)
        state = init_optimizer_state(params)
        for _ in range(3):
            params, state = optimizer_step(params, _grads(0.0), state, OptimizerConfig("adam"))
        assert params.layers[0][0][0, 0] == 2.0
        assert state.step == 3

    def test_inputs_not_modified(self):
        params = _scalar_params(1.0)
        state = init_optimizer_state(params)
        optimizer_step(params, _grads(0.5), state, OptimizerConfig("adam"))
        assert params.layers[0][0][0, 0] == 1.0
        assert state.step == 0 and not state.first_moment["layers.0.weight"].any()

    def test_key_mismatch(self):
        params = _scalar_params(1.0)
        with pytest.raises(ValidationError, match="missing"):
            optimizer_step(params, {"layers.0.weight": np.array([[1.0]])}, init_optimizer_state(params),
                           OptimizerConfig())

    def test_shape_mismatch(self):
        params = _scalar_params(1.0)
        grads = {"layers.0.weight": np.zeros((2, 1)), "layers.0.bias": np.zeros(1)}
        with pytest.raises(ShapeError):
            optimizer_step(params, grads, init_optimizer_state(params), OptimizerConfig())


class TestCheckpoint:
    def _checkpoint(self, tiny_config):
        params = init_params(tiny_config.model)
        state = init_optimizer_state(params)
        rng = np.random.default_rng(0)
        state.first_moment = {k: rng.normal(size=v.shape) / 3.0 for k, v in state.first_moment.items()}
        state.step = 17
        return Checkpoint(tiny_config.to_dict(), "stage2", 4, params, state, {"note": "x"})

    def test_round_trip_is_exact(self, tmp_path, tiny_config):
        checkpoint = self._checkpoint(tiny_config)
        loaded = load_checkpoint(save_checkpoint(checkpoint, tmp_path / "c" / "ckpt.json"))
        assert loaded.equals(checkpoint)

    def test_unwritable_path_names_path(self, tmp_path, tiny_config):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        target = blocker / "ckpt.json"
        with pytest.raises(CheckpointError, match="blocker") as info:
            save_checkpoint(self._checkpoint(tiny_config), target)
        assert info.value.path == str(target)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1}')
        with pytest.raises(CheckpointError, match="malformed"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="cannot read"):
            load_checkpoint(tmp_path / "absent.json")


class TestTrainConfig:
    def test_defaults_are_valid(self):
        assert TrainConfig().validate().valid

    def test_issues_carry_section_prefix(self):
        config = TrainConfig(batch_size=0, lr_stage1=-1.0)
        config.vrex.warmup_epochs = -1
        with pytest.raises(ConfigError) as info:
            config.check()
        assert any(issue.startswith("vrex.") for issue in info.value.issues)
        assert len(info.value.issues) == 3

    def test_from_flat_parses_strings(self):
        config = from_flat({"vrex.lambda_max": "5", "batch_size": "8", "adam_betas": "0.8,0.99",
                            "stage2_keep_vrex": "yes", "model.hidden_dims": "16,4"})
        assert config.vrex.lambda_max == 5.0
        assert config.batch_size == 8
        assert config.adam_betas == (0.8, 0.99)
        assert config.stage2_keep_vrex is True
        assert config.model.hidden_dims == [16, 4]

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="vrex.lamda"):
            from_flat({"vrex.lamda": "1"})

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="batch_size"):
            coerce_value("batch_size", "1.5", 64)

    def test_dict_round_trip(self, tiny_config):
        assert TrainConfig.from_dict(tiny_config.to_dict()) == tiny_config

    def test_adam_betas_stay_a_tuple(self, tiny_config):
        restored = TrainConfig.from_dict(TrainConfig().to_dict())
        assert restored.adam_betas == (0.9, 0.999)
        assert restored == TrainConfig()
        assert from_flat({"lr_stage1": "0.01"}, tiny_config).adam_betas == tiny_config.adam_betas

    def test_method_presets(self):
        base = TrainConfig()
        assert apply_method(base, "erm").vrex.lambda_max == 0.0
        assert apply_method(base, "erm").stage2_epochs == 0
        assert apply_method(base, "vrex").stage2_epochs == 0
        assert apply_method(base, "vrex").vrex.lambda_max == base.vrex.lambda_max
        assert apply_method(base, "mixup").vrex.lambda_max == 0.0
        assert apply_method(base, "mixup").stage2_epochs == base.stage2_epochs
        assert apply_method(base, "vrex_mixup") == base
        with pytest.raises(ConfigError):
            apply_method(base, "irm")

    def test_seeded(self):
        config = seeded(TrainConfig(), 9)
        assert (config.run_seed, config.model.seed, config.mixup.seed) == (9, 9, 9)


class TestStages:
    def test_stage1_zero_epochs_is_identity(self, small_bundle, tiny_config):
        config = replace(tiny_config, stage1_epochs=0)
        params, log = train_stage1_vrex(small_bundle, config)
        assert _same_params(params, init_params(config.model))
        assert len(log) == 0

    def test_stage2_zero_epochs_is_identity(self, small_bundle, tiny_config):
        start = init_params(tiny_config.model)
        params, _ = train_stage2_mixup(start, small_bundle, replace(tiny_config, stage2_epochs=0))
        assert _same_params(params, start)

    def test_lambda_zero_matches_pooled_mean_erm(self, small_bundle, tiny_config):
        config = replace(tiny_config, batch_size=8, stage1_epochs=100,
                         vrex=replace(tiny_config.vrex, lambda_max=0.0))
        logged = []
        train_stage1_vrex(small_bundle, config, on_step=lambda record: logged.append(record.objective))

        envs = small_bundle.train_envs
        params = init_params(config.model)
        state = init_optimizer_state(params)
        opt = optimizer_config(config, "stage1")
        reference = []
        for epoch in range(config.stage1_epochs):
            for group in stratified_batches(envs, config.batch_size, epoch_seed(config.run_seed, epoch)):
                tape = Tape()
                bound = bind_params(params, tape)
                loss = reduce_mean(stack(per_environment_risks(bound, group).risks))
                params, state = optimizer_step(params, bound.gradients(tape.backward(loss)), state, opt)
                reference.append(loss.item())
        assert len(logged) == len(reference) >= 500
        np.testing.assert_allclose(logged, reference, rtol=0, atol=1e-12)

    def test_logged_objective_decomposes(self, small_bundle, tiny_config):
        _, log = train_stage1_vrex(small_bundle, tiny_config)
        for record in log:
            assert abs(record.objective - (record.mean_risk + record.lam * record.risk_variance)) < 1e-9
        assert [r.lam for r in log] == [0.0, 5.0, 10.0]

    def test_large_alpha_gives_half_targets(self, small_bundle, tiny_config):
        config = replace(tiny_config, mixup=MixupConfig(alpha=1e6, seed=2))
        batches = []
        train_stage2_mixup(init_params(config.model), small_bundle, config,
                           on_step=lambda record: batches.append(record.batch))
        opposite = 0
        for batch in batches:
            envs = small_bundle.train_envs
            la = np.array([envs[k].labels[row] for k, row in batch.first])
            lb = np.array([envs[k].labels[row] for k, row in batch.second])
            mask = la != lb
            opposite += int(mask.sum())
            np.testing.assert_allclose(batch.soft_labels[mask], 0.5, atol=5e-3)
        assert opposite > 0

    def test_stage2_is_deterministic(self, small_bundle, tiny_config):
        start = init_params(tiny_config.model)
        first, _ = train_stage2_mixup(start, small_bundle, tiny_config)
        second, _ = train_stage2_mixup(start, small_bundle, tiny_config)
        assert _same_params(first, second)

    def test_keep_vrex_logs_penalty(self, small_bundle, tiny_config):
        config = replace(tiny_config, stage2_keep_vrex=True)
        _, log = train_stage2_mixup(init_params(config.model), small_bundle, config)
        for record in log:
            assert record.lam == 10.0
            assert len(record.env_risks) == 4
            assert abs(record.objective - (record.mean_risk + record.lam * record.risk_variance)) < 1e-9


class TestRunTwoStage:
    def test_zero_epochs_returns_init(self, small_bundle, tiny_config):
        config = replace(tiny_config, stage1_epochs=0, stage2_epochs=0)
        result = run_two_stage(small_bundle, config)
        assert _same_params(result.params, init_params(config.model))
        assert result.val_report is not None and result.test_report is not None

    def test_outputs_are_byte_identical(self, tmp_path, small_bundle, tiny_config):
        config = replace(tiny_config, checkpoint_every=1)
        run_two_stage(small_bundle, config, tmp_path / "a")
        run_two_stage(small_bundle, config, tmp_path / "b")
        names = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert Path("checkpoints") / "final.json" in names
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_checkpoint_files(self, tmp_path, small_bundle, tiny_config):
        config = replace(tiny_config, checkpoint_every=2)
        result = run_two_stage(small_bundle, config, tmp_path)
        assert [p.name for p in result.checkpoints] == [
            "stage1_epoch0002.json", "stage1_epoch0003.json", "stage2_epoch0002.json", "final.json",
        ]
        boundary = load_checkpoint(tmp_path / "checkpoints" / "stage1_epoch0003.json")
        assert boundary.extra["stage_complete"] is True
        assert len(boundary.extra["log"]) == 3
        assert boundary.extra["checkpoints"] == ["stage1_epoch0002.json", "stage1_epoch0003.json"]
        log = TrainLog.read(tmp_path / "train_log.jsonl")
        assert [(r.stage, r.epoch) for r in log] == [
            ("stage1", 0), ("stage1", 1), ("stage1", 2), ("stage2", 0), ("stage2", 1),
        ]

    @pytest.mark.parametrize("name", ["stage1_epoch0001.json", "stage1_epoch0003.json",
                                      "stage2_epoch0001.json", "final.json"])
    def test_resume_matches_uninterrupted(self, tmp_path, small_bundle, tiny_config, name):
        config = replace(tiny_config, checkpoint_every=1)
        full = run_two_stage(small_bundle, config, tmp_path / "full")
        resumed = run_two_stage(small_bundle, config, tmp_path / "resumed",
                                resume_from=tmp_path / "full" / "checkpoints" / name)
        assert _same_params(full.params, resumed.params)
        assert resumed.val_report.average_macro_f1 == full.val_report.average_macro_f1
        assert [p.name for p in resumed.checkpoints] == [p.name for p in full.checkpoints]
        for artifact in ("train_log.jsonl", "checkpoints/final.json"):
            assert (tmp_path / "resumed" / artifact).read_bytes() == (tmp_path / "full" / artifact).read_bytes()

    def test_early_stop_keeps_the_stopping_epoch(self, tmp_path, small_bundle, tiny_config):
        # stage 1 cannot move the weights, so validation F1 stalls after its first epoch
        config = replace(tiny_config, lr_stage1=1e-300, stage2_epochs=4, early_stop_patience=1)
        stopped = run_two_stage(small_bundle, config, tmp_path)
        stage1 = stopped.log.stage("stage1")
        stage2 = stopped.log.stage("stage2")
        assert [r.epoch for r in stage1] == [0, 1]
        assert 1 <= len(stage2) <= config.stage2_epochs
        boundary = load_checkpoint(tmp_path / "checkpoints" / "stage1_epoch0002.json")
        assert boundary.extra["stage_complete"] is True

        plain = replace(config, stage1_epochs=len(stage1), stage2_epochs=len(stage2), early_stop_patience=0)
        assert _same_params(run_two_stage(small_bundle, plain).params, stopped.params)

    def test_resume_rejects_other_architecture(self, tmp_path, small_bundle, tiny_config):
        run_two_stage(small_bundle, replace(tiny_config, stage2_epochs=0), tmp_path)
        other = replace(tiny_config, model=replace(tiny_config.model, hidden_dims=[4]))
        with pytest.raises(CheckpointError, match="do not fit"):
            run_two_stage(small_bundle, other, resume_from=tmp_path / "checkpoints" / "final.json")

    def test_width_mismatch(self, small_bundle, tiny_config):
        config = replace(tiny_config, model=replace(tiny_config.model, input_dim=5))
        with pytest.raises(ShapeError, match="6 features"):
            run_two_stage(small_bundle, config)


class TestTrainLog:
    def test_jsonl_uses_lambda_key(self, tmp_path):
        log = TrainLog([EpochRecord(0, "stage1", [0.5, 0.7], 0.6, 0.01, 2.0, 0.62)])
        text = log.to_jsonl()
        assert '"lambda": 2.0' in text
        assert TrainLog.read(log.write(tmp_path / "log.jsonl")).records == log.records

    def test_bad_line_is_named(self, tmp_path):
        path = tmp_path / "log.jsonl"
        good = TrainLog([EpochRecord(0, "stage1", [0.5], 0.5, 0.0, 0.0, 0.5)]).to_jsonl()
        path.write_text(good + '{"epoch": 1}\n', encoding="utf-8")
        with pytest.raises(DataFormatError, match="line 2"):
            TrainLog.read(path)


    def test_non_utf8_line_is_named(self, tmp_path):
        path = tmp_path / "log.jsonl"
        good = TrainLog([EpochRecord(0, "stage1", [0.5], 0.5, 0.0, 0.0, 0.5)]).to_jsonl()
        path.write_bytes(good.encode("utf-8") + b'{"epoch": \xff1}\n')
        with pytest.raises(DataFormatError, match="line 2"):
            TrainLog.read(path)


class TestEarlyStopper:
    def test_patience(self):
        stopper = EarlyStopper(2)
        assert not stopper.update(0.5)
        assert not stopper.update(0.4)
        assert stopper.update(0.45)
        assert stopper.best == 0.5

    def test_state_round_trip(self):
        stopper = EarlyStopper(3)
        stopper.update(0.7)
        stopper.update(0.6)
        restored = EarlyStopper.from_state(3, stopper.state())
        assert (restored.best, restored.bad_epochs) == (0.7, 1)
        assert EarlyStopper.from_state(3, None).best == -np.inf
