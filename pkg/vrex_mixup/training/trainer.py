"""
Two-stage training: VREx-penalized pretraining over environment-stratified
batches, then Mixup fine-tuning from the pretrained parameters.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from utilities.structured_logger import get_structured_logger
from ..data.batching import epoch_seed, stratified_batches, steps_per_epoch
from ..data.environments import DatasetBundle
from ..engine import ops
from ..engine.tape import Tape
from ..errors import CheckpointError, ShapeError
from ..metrics.classification import EvalReport, evaluate
from ..model.mlp import ModelParams, bind_params, init_params
from ..objectives.mixup import mixed_loss, sample_mixup_batch
from ..objectives.vrex import lambda_at_epoch, per_environment_risks, risk_statistics, vrex_objective
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .optimizer import OptimizerConfig, OptimizerState, init_optimizer_state, optimizer_step
from .train_log import EpochAccumulator, EpochRecord, StepRecord, TrainLog

structured_logger = get_structured_logger("trainer")

StepHook = Callable[[StepRecord], None]
# Called after each epoch with (epoch, params, state, record); returning True ends the stage.
EpochHook = Callable[[int, ModelParams, OptimizerState, EpochRecord], bool]

PathLike = Union[str, Path]


@dataclass
class TwoStageResult:
    params: ModelParams
    log: TrainLog
    checkpoints: List[Path] = field(default_factory=list)
    val_report: Optional[EvalReport] = None
    test_report: Optional[EvalReport] = None


def optimizer_config(config: TrainConfig, stage: str) -> OptimizerConfig:
    lr = config.lr_stage1 if stage == "stage1" else config.lr_stage2
    return OptimizerConfig(config.optimizer, lr, tuple(config.adam_betas), config.adam_eps)


def mixup_step_seed(run_seed: int, epoch: int, step: int) -> int:
    """Seed of one Stage 2 step's pair and coefficient draws."""
    state = np.random.SeedSequence([int(run_seed), 2, int(epoch), int(step)]).generate_state(1, np.uint64)
    return int(state[0])


def check_compatible(bundle: DatasetBundle, config: TrainConfig) -> None:
    """
    Raises:
        ShapeError: If the model's input or output width does not fit the data
    """
    if bundle.feature_dim != config.model.input_dim:
        raise ShapeError(
            f"data has {bundle.feature_dim} features but model.input_dim is {config.model.input_dim}",
            (bundle.feature_dim,), (config.model.input_dim,),
        )
    if bundle.num_classes != config.model.num_classes:
        raise ShapeError(
            f"data has {bundle.num_classes} classes but model.num_classes is {config.model.num_classes}",
            (bundle.num_classes,), (config.model.num_classes,),
        )


def _elapsed(start: float, config: TrainConfig) -> float:
    return time.perf_counter() - start if config.log_wall_time else 0.0


def _log_epoch(record: EpochRecord) -> None:
    structured_logger.info(
        "Epoch finished",
        stage=record.stage,
        epoch=record.epoch,
        objective=record.objective,
        mean_risk=record.mean_risk,
        risk_variance=record.risk_variance,
        **{"lambda": record.lam},
    )


def run_stage1(bundle: DatasetBundle, config: TrainConfig, params: ModelParams,
               state: OptimizerState, start_epoch: int = 0, on_step: Optional[StepHook] = None,
               on_epoch_end: Optional[EpochHook] = None) -> Tuple[ModelParams, OptimizerState, TrainLog]:
    """Stage 1 from ``start_epoch``; returns params, optimizer state and the records produced."""
    log = TrainLog()
    envs = bundle.train_envs
    opt = optimizer_config(config, "stage1")
    mode = config.vrex.variance_mode
    for epoch in range(start_epoch, config.stage1_epochs):
        start = time.perf_counter()
        lam = lambda_at_epoch(config.vrex, epoch)
        totals = EpochAccumulator()
        batches = stratified_batches(envs, config.batch_size, epoch_seed(config.run_seed, epoch))
        for step, group in enumerate(batches):
            tape = Tape()
            bound = bind_params(params, tape)
            risks = per_environment_risks(bound, group, bundle.num_classes, len(envs))
            objective = vrex_objective(risks, lam, mode)
            grads = bound.gradients(tape.backward(objective))
            params, state = optimizer_step(params, grads, state, opt)

            values = risks.values()
            stats = risk_statistics(values, mode)
            totals.add(values, stats["mean"], stats["variance"], objective.item())
            structured_logger.debug("Step", stage="stage1", epoch=epoch, step=step,
                                    objective=objective.item())
            if on_step:
                on_step(StepRecord("stage1", epoch, step, values.tolist(), objective.item()))

        record = totals.record(epoch, "stage1", lam, _elapsed(start, config))
        log.append(record)
        _log_epoch(record)
        if on_epoch_end and on_epoch_end(epoch, params, state, record):
            break
    return params, state, log


def run_stage2(bundle: DatasetBundle, config: TrainConfig, params: ModelParams,
               state: OptimizerState, start_epoch: int = 0, on_step: Optional[StepHook] = None,
               on_epoch_end: Optional[EpochHook] = None) -> Tuple[ModelParams, OptimizerState, TrainLog]:
    """
    Stage 2 from ``start_epoch``.

    Each step draws one mixed batch; with ``stage2_keep_vrex`` the step also
    draws a stratified batch group and adds lambda_max times its risk variance.
    """
    log = TrainLog()
    envs = bundle.train_envs
    opt = optimizer_config(config, "stage2")
    mode = config.vrex.variance_mode
    keep_vrex = config.stage2_keep_vrex
    lam = float(config.vrex.lambda_max) if keep_vrex else 0.0
    n_steps = steps_per_epoch(envs, config.batch_size)
    for epoch in range(start_epoch, config.stage2_epochs):
        start = time.perf_counter()
        totals = EpochAccumulator()
        groups = stratified_batches(envs, config.batch_size, epoch_seed(config.run_seed, epoch)) if keep_vrex else None
        for step in range(n_steps):
            mixed = sample_mixup_batch(envs, config.batch_size, config.mixup,
                                       mixup_step_seed(config.run_seed, epoch, step), bundle.num_classes)
            tape = Tape()
            bound = bind_params(params, tape)
            loss = mixed_loss(bound, mixed)
            objective = loss
            values = np.zeros(0)
            variance = 0.0
            if keep_vrex:
                risks = per_environment_risks(bound, next(groups), bundle.num_classes, len(envs))
                penalty = ops.variance_scalar(ops.stack(risks.risks), mode)
                objective = ops.add(loss, ops.scale(penalty, lam))
                values = risks.values()
                variance = penalty.item()
            grads = bound.gradients(tape.backward(objective))
            params, state = optimizer_step(params, grads, state, opt)

            totals.add(values, loss.item(), variance, objective.item())
            structured_logger.debug("Step", stage="stage2", epoch=epoch, step=step,
                                    objective=objective.item())
            if on_step:
                on_step(StepRecord("stage2", epoch, step, values.tolist(), objective.item(), mixed))

        record = totals.record(epoch, "stage2", lam, _elapsed(start, config))
        log.append(record)
        _log_epoch(record)
        if on_epoch_end and on_epoch_end(epoch, params, state, record):
            break
    return params, state, log


def train_stage1_vrex(bundle: DatasetBundle, config: TrainConfig, params: Optional[ModelParams] = None,
                      on_step: Optional[StepHook] = None) -> Tuple[ModelParams, TrainLog]:
    """
    VREx pretraining for ``config.stage1_epochs`` epochs.

    Args:
        bundle: Data with at least two training environments
        config: Run configuration
        params: Starting parameters; ``init_params(config.model)`` when None
        on_step: Called after every optimizer step

    Returns:
        Final parameters and one log record per epoch
    """
    config.check()
    check_compatible(bundle, config)
    params = params if params is not None else init_params(config.model)
    params, _, log = run_stage1(bundle, config, params, init_optimizer_state(params), on_step=on_step)
    return params, log


def train_stage2_mixup(params: ModelParams, bundle: DatasetBundle, config: TrainConfig,
                       on_step: Optional[StepHook] = None) -> Tuple[ModelParams, TrainLog]:
    """Mixup fine-tuning for ``config.stage2_epochs`` epochs with fresh optimizer state."""
    config.check()
    check_compatible(bundle, config)
    params, _, log = run_stage2(bundle, config, params, init_optimizer_state(params), on_step=on_step)
    return params, log


class EarlyStopper:
    """Stops a stage after ``patience`` epochs without a better validation score."""

    def __init__(self, patience: int, best: float = -np.inf, bad_epochs: int = 0):
        self.patience = patience
        self.best = best
        self.bad_epochs = bad_epochs

    def update(self, score: float) -> bool:
        if score > self.best:
            self.best = score
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        return self.bad_epochs >= self.patience

    def state(self) -> dict:
        return {"best": None if np.isinf(self.best) else self.best, "bad_epochs": self.bad_epochs}

    @classmethod
    def from_state(cls, patience: int, state: Optional[dict]) -> "EarlyStopper":
        if not state:
            return cls(patience)
        best = state.get("best")
        return cls(patience, -np.inf if best is None else float(best), int(state.get("bad_epochs", 0)))


class _Checkpointer:
    """
    Writes checkpoints under ``out_dir/checkpoints``.

    Every checkpoint carries the epoch records logged so far and the names of
    the checkpoints written before it, so a resumed run reproduces both.
    """

    def __init__(self, out_dir: Optional[Path], config: TrainConfig, history: List[EpochRecord],
                 earlier: Optional[List[str]] = None):
        self.directory = Path(out_dir) / "checkpoints" if out_dir is not None else None
        self.config = config
        self.history = history
        self.names: List[str] = list(earlier or [])

    @property
    def paths(self) -> List[Path]:
        if self.directory is None:
            return []
        return [self.directory / name for name in self.names]

    def save(self, stage: str, epoch: int, params: ModelParams, state: OptimizerState,
             extra: Optional[dict] = None) -> Optional[Path]:
        if self.directory is None:
            return None
        name = "final.json" if stage == "final" else f"{stage}_epoch{epoch:04d}.json"
        if name not in self.names:
            self.names.append(name)
        extra = dict(extra or {})
        extra["log"] = [record.to_dict() for record in self.history]
        extra["checkpoints"] = list(self.names)
        checkpoint = Checkpoint(self.config.to_dict(), stage, epoch, params, state, extra)
        path = save_checkpoint(checkpoint, self.directory / name)
        structured_logger.info("Checkpoint saved", stage=stage, epoch=epoch, path=str(path))
        return path


def _resume_point(checkpoint: Checkpoint, config: TrainConfig, path: str) -> None:
    named = checkpoint.params.named_tensors()
    expected = init_params(config.model).named_tensors()
    if {k: v.shape for k, v in named.items()} != {k: v.shape for k, v in expected.items()}:
        raise CheckpointError("checkpoint parameters do not fit model config", path)
    if checkpoint.config != config.to_dict():
        current = config.flatten()
        saved = TrainConfig.from_dict(checkpoint.config).flatten()
        changed = sorted(k for k in current if current[k] != saved.get(k))
        structured_logger.warning("Resuming with a different config", path=path, changed=changed)


def _resumed_history(checkpoint: Checkpoint, path: str) -> List[EpochRecord]:
    try:
        return [EpochRecord.from_dict(values) for values in checkpoint.extra.get("log", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint log is malformed ({exc})", path) from exc


def run_two_stage(bundle: DatasetBundle, config: TrainConfig, out_dir: Optional[PathLike] = None,
                  resume_from: Optional[Union[PathLike, Checkpoint]] = None,
                  on_step: Optional[StepHook] = None) -> TwoStageResult:
    """
    Stage 1 then Stage 2, with checkpoints, the combined log and final reports.

    Checkpoints are written every ``checkpoint_every`` epochs and at both stage
    boundaries when ``out_dir`` is given; the log goes to ``train_log.jsonl``.
    A checkpoint's epoch counts the epochs completed in its stage, and resuming
    continues with the next one. The log and checkpoint list of a resumed run
    start from the records stored in the checkpoint, so they match an
    uninterrupted run. Stage 2 starts with fresh optimizer state.

    With ``early_stop_patience`` a stage ends once the validation average macro
    F1 has not improved for that many epochs; the stage keeps the parameters of
    the epoch it stopped on.

    Args:
        bundle: Training, validation and optional test environments
        config: Run configuration
        out_dir: Directory for checkpoints and the log; nothing is written when None
        resume_from: Checkpoint (or its path) to continue from
        on_step: Called after every optimizer step

    Returns:
        TwoStageResult with validation and (when present) test reports

    Raises:
        ConfigError: If the config is invalid
        CheckpointError: If a checkpoint cannot be written or does not fit the config
    """
    config.check()
    check_compatible(bundle, config)
    out_dir = Path(out_dir) if out_dir is not None else None
    patience = config.early_stop_patience

    params = init_params(config.model)
    state = init_optimizer_state(params)
    stage1_start, stage2_start = 0, 0
    stage1_done = False
    resumed_stage = None
    extra = {}
    history: List[EpochRecord] = []
    earlier: List[str] = []
    if resume_from is not None:
        source = str(resume_from) if not isinstance(resume_from, Checkpoint) else "<memory>"
        checkpoint = resume_from if isinstance(resume_from, Checkpoint) else load_checkpoint(resume_from)
        _resume_point(checkpoint, config, source)
        params, state, extra = checkpoint.params, checkpoint.optimizer_state.copy(), checkpoint.extra
        history = _resumed_history(checkpoint, source)
        earlier = [str(name) for name in extra.get("checkpoints", [])]
        resumed_stage = checkpoint.stage
        if checkpoint.stage == "stage1":
            stage1_start = checkpoint.epoch
            stage1_done = bool(extra.get("stage_complete"))
        else:
            stage1_done = True
            stage2_start = checkpoint.epoch
        structured_logger.info("Resuming", source=source, stage=checkpoint.stage, epoch=checkpoint.epoch,
                               records=len(history))
    checkpointer = _Checkpointer(out_dir, config, history, earlier)

    def hooks(stage: str, stopper: EarlyStopper) -> EpochHook:
        def on_epoch_end(epoch, epoch_params, epoch_state, record):
            history.append(record)
            stop = False
            if patience > 0 and bundle.val_envs:
                score = evaluate(epoch_params, bundle.val_envs, config.eval_weighting).average_macro_f1
                stop = stopper.update(score)
                if stop:
                    structured_logger.info("Early stop", stage=stage, epoch=epoch, best=stopper.best)
            every = config.checkpoint_every
            if every and (epoch + 1) % every == 0 and not stop:
                checkpointer.save(stage, epoch + 1, epoch_params, epoch_state,
                                  {"early_stop": stopper.state()})
            return stop
        return on_epoch_end

    with structured_logger.operation_context("two_stage_training", run_seed=config.run_seed,
                                             stage1_epochs=config.stage1_epochs,
                                             stage2_epochs=config.stage2_epochs):
        if not stage1_done:
            stopper = EarlyStopper.from_state(patience, extra.get("early_stop") if resumed_stage == "stage1" else None)
            params, state, stage1_log = run_stage1(bundle, config, params, state, stage1_start,
                                                   on_step, hooks("stage1", stopper))
            completed = stage1_log.records[-1].epoch + 1 if stage1_log.records else stage1_start
            checkpointer.save("stage1", completed, params, state, {"stage_complete": True})

        if resumed_stage != "stage2" and resumed_stage != "final":
            state = init_optimizer_state(params)
        if resumed_stage != "final":
            stopper = EarlyStopper.from_state(patience, extra.get("early_stop") if resumed_stage == "stage2" else None)
            params, state, stage2_log = run_stage2(bundle, config, params, state, stage2_start,
                                                   on_step, hooks("stage2", stopper))
            completed = stage2_log.records[-1].epoch + 1 if stage2_log.records else stage2_start
            checkpointer.save("stage2", completed, params, state, {"stage_complete": True})
        checkpointer.save("final", config.stage2_epochs, params, state)

    log = TrainLog(list(history))
    result = TwoStageResult(params, log, checkpointer.paths)
    if bundle.val_envs:
        result.val_report = evaluate(params, bundle.val_envs, config.eval_weighting)
    if bundle.test_envs:
        result.test_report = evaluate(params, bundle.test_envs, config.eval_weighting)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log.write(out_dir / "train_log.jsonl")
    structured_logger.info(
        "Training finished",
        val_average_macro_f1=result.val_report.average_macro_f1 if result.val_report else None,
        test_average_macro_f1=result.test_report.average_macro_f1 if result.test_report else None,
    )
    return result


__all__ = [
    'TwoStageResult', 'StepHook', 'EpochHook', 'EarlyStopper', 'optimizer_config', 'mixup_step_seed',
    'check_compatible', 'run_stage1', 'run_stage2', 'train_stage1_vrex', 'train_stage2_mixup',
    'run_two_stage',
]
