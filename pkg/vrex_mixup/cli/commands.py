"""
Command implementations. Each takes parsed arguments, writes its artifacts and
returns the process exit code; results go to stdout, logs to stderr.
"""

from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from utilities.structured_logger import get_structured_logger
from ..data.csv_io import SPLIT_FILES, infer_feature_dim, load_bundle, load_csv, save_bundle
from ..data.environments import DatasetBundle
from ..data.synthetic import TRAIN_TOTAL, VAL_TOTAL, SpuriousSpec, even_split, generate_spurious_environments
from ..errors import DataFormatError, SchemaError, UsageError
from ..metrics.classification import EvalReport, evaluate
from ..metrics.report_io import read_report_json, report_frame, write_report_csv, write_report_json
from ..training.checkpoint import load_checkpoint
from ..training.config import TrainConfig, apply_method, from_flat, seeded
from ..training.train_log import TrainLog
from ..training.trainer import run_two_stage
from ..verification import run_gradcheck_suite
from .config_file import apply_flat, parse_overrides, read_config_file
from .manifest import RunManifest

structured_logger = get_structured_logger("cli")

# argparse dest -> dotted config key
TRAIN_FLAG_KEYS = {
    "stage1_epochs": "stage1_epochs",
    "stage2_epochs": "stage2_epochs",
    "lambda_max": "vrex.lambda_max",
    "warmup_epochs": "vrex.warmup_epochs",
    "alpha": "mixup.alpha",
    "pairing": "mixup.pairing",
    "batch_size": "batch_size",
    "lr_stage1": "lr_stage1",
    "lr_stage2": "lr_stage2",
    "optimizer": "optimizer",
    "checkpoint_every": "checkpoint_every",
    "weighting": "eval_weighting",
}

SPEC_FLAG_KEYS = {
    "n_train_envs": "n_train_envs",
    "test_correlation": "test_correlation",
    "n_invariant_dims": "n_invariant_dims",
    "invariant_mean": "invariant_mean",
    "invariant_std": "invariant_std",
    "spurious_mean": "spurious_mean",
    "spurious_std": "spurious_std",
    "test_size": "test_size",
    "class_balance": "class_balance",
    "val_class_balance": "val_class_balance",
    "label_sampling": "label_sampling",
}


def format_metric(value: float) -> str:
    return repr(float(value))


def _float_list(text: str, flag: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}")


def _int_list(text: str, flag: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}")


# gen-data

def resolve_spec(args) -> SpuriousSpec:
    """Defaults, then the spec file, then flags."""
    spec = SpuriousSpec()
    if args.config:
        spec = apply_flat(spec, read_config_file(args.config, asdict(spec).keys()))
    flat = {key: getattr(args, dest) for dest, key in SPEC_FLAG_KEYS.items() if getattr(args, dest) is not None}
    if args.seed is not None:
        flat["seed"] = args.seed
    spec = apply_flat(spec, flat)

    if args.n_train_envs is not None:
        n = spec.n_train_envs
        if len(spec.train_sizes) != n:
            spec = replace(spec, train_sizes=even_split(TRAIN_TOTAL, n))
        if len(spec.val_sizes) != n:
            spec = replace(spec, val_sizes=even_split(VAL_TOTAL, n))
    if args.train_correlations is not None:
        correlations = _float_list(args.train_correlations, "--train-correlations")
        if len(correlations) != spec.n_train_envs:
            raise UsageError(
                f"--train-correlations has {len(correlations)} values, expected {spec.n_train_envs} "
                f"(one per training environment)"
            )
        spec = replace(spec, train_correlations=correlations)
    for flag, field_name in (("train_sizes", "train_sizes"), ("val_sizes", "val_sizes")):
        text = getattr(args, flag)
        if text is not None:
            sizes = _int_list(text, f"--{flag.replace('_', '-')}")
            if len(sizes) != spec.n_train_envs:
                raise UsageError(
                    f"--{flag.replace('_', '-')} has {len(sizes)} values, expected {spec.n_train_envs}"
                )
            spec = replace(spec, **{field_name: sizes})
    return spec


def cmd_gen_data(args) -> int:
    out_dir = Path(args.out or "data")
    with structured_logger.operation_context("gen_data", out=str(out_dir)):
        spec = resolve_spec(args)
        bundle = generate_spurious_environments(spec)
        written = save_bundle(bundle, out_dir)
        manifest = RunManifest("gen-data", spec.to_dict(), spec.seed, args.config)
        for split, path in written.items():
            manifest.add_artifact(split, path, out_dir)
        manifest.write(out_dir)

    for name, envs in (("train", bundle.train_envs), ("val", bundle.val_envs), ("test", bundle.test_envs)):
        positives = sum(int(env.labels.sum()) for env in envs)
        total = sum(len(env) for env in envs)
        print(f"{name}_rows={total} class0={total - positives} class1={positives}")
    return 0


# train

def resolve_train_config(args) -> Tuple[TrainConfig, Dict[str, Any]]:
    """
    Layer defaults, config file, flags and ``--set`` overrides, then the seed
    and the method preset.

    Returns:
        The checked config and the explicitly given dotted keys
    """
    known = TrainConfig().flatten().keys()
    flat: Dict[str, Any] = {}
    if args.config:
        flat.update(read_config_file(args.config, known))
    for dest, key in TRAIN_FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            flat[key] = value
    flat.update(parse_overrides(getattr(args, "set", None), known))
    config = from_flat(flat)
    if args.seed is not None:
        config = seeded(config, args.seed)
    config = apply_method(config, args.method)
    return config, flat


def load_training_data(data: Optional[str], spec: Optional[Dict[str, Any]], num_classes: int,
                       seed: int, out_dir: Path) -> Tuple[DatasetBundle, Dict[str, Any]]:
    """Read a dataset directory, or generate one (saved under ``out_dir/data``) when none is given."""
    if data:
        data_dir = Path(data)
        feature_dim = infer_feature_dim(data_dir / SPLIT_FILES["train"])
        return load_bundle(data_dir, feature_dim, num_classes), {"path": data_dir.as_posix()}
    spec_obj = SpuriousSpec.from_dict(spec) if spec else SpuriousSpec(seed=seed)
    bundle = generate_spurious_environments(spec_obj)
    save_bundle(bundle, out_dir / "data")
    return bundle, {"path": "data", "spec": spec_obj.to_dict()}


def write_reports(result, out_dir: Path, manifest: RunManifest) -> None:
    for split, report in (("val", result.val_report), ("test", result.test_report)):
        if report is None:
            continue
        manifest.add_artifact(f"eval_{split}", write_report_json(report, out_dir / f"eval_{split}.json"), out_dir)
        manifest.add_artifact(f"eval_{split}_csv", write_report_csv(report, out_dir / f"eval_{split}.csv"), out_dir)


def cmd_train(args) -> int:
    out_dir = Path(args.out or "runs/train")
    out_dir.mkdir(parents=True, exist_ok=True)
    with structured_logger.operation_context("train", out=str(out_dir)):
        if args.manifest:
            previous = RunManifest.read(args.manifest)
            config = TrainConfig.from_dict(previous.config).check()
            data_path = previous.data.get("path") if "spec" not in previous.data else None
            bundle, data_info = load_training_data(data_path, previous.data.get("spec"),
                                                   config.model.num_classes, config.run_seed, out_dir)
            config_path = previous.config_path
            resume = args.resume or previous.resume
        else:
            config, explicit = resolve_train_config(args)
            bundle, data_info = load_training_data(args.data, None, config.model.num_classes,
                                                   config.run_seed, out_dir)
            if "model.input_dim" not in explicit:
                config = replace(config, model=replace(config.model, input_dim=bundle.feature_dim))
            config.check()
            config_path = args.config
            resume = args.resume

        result = run_two_stage(bundle, config, out_dir, resume_from=resume)

        manifest = RunManifest("train", config.to_dict(), config.run_seed, config_path, data_info,
                               resume=Path(resume).as_posix() if resume else None)
        if "spec" in data_info:
            for split in ("train", "val", "test"):
                path = out_dir / "data" / SPLIT_FILES[split]
                if path.exists():
                    manifest.add_artifact(f"data_{split}", path, out_dir)
        # a run resumed into another directory lacks the earlier checkpoint files
        for path in (p for p in result.checkpoints if p.exists()):
            manifest.add_artifact(f"checkpoint_{path.stem}", path, out_dir)
        manifest.add_artifact("train_log", out_dir / "train_log.jsonl", out_dir)
        write_reports(result, out_dir, manifest)
        manifest.write(out_dir)

    if result.test_report is not None:
        print(f"test_macro_f1={format_metric(result.test_report.average_macro_f1)}")
    print(f"average_macro_f1={format_metric(result.val_report.average_macro_f1)}")
    return 0


# eval

def cmd_eval(args) -> int:
    out_dir = Path(args.out or "runs/eval")
    with structured_logger.operation_context("eval", checkpoint=args.checkpoint, split=args.split):
        checkpoint = load_checkpoint(args.checkpoint)
        params = checkpoint.params
        path = Path(args.data) / SPLIT_FILES[args.split]
        feature_dim = infer_feature_dim(path)
        if feature_dim != params.input_dim:
            raise SchemaError(
                f"dataset {path} has feature_dim {feature_dim} but the checkpoint expects {params.input_dim}"
            )
        envs = load_csv(path, feature_dim, params.num_classes)
        report = evaluate(params, envs, args.weighting, args.pooled)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_report_json(report, out_dir / f"eval_{args.split}.json")
        write_report_csv(report, out_dir / f"eval_{args.split}.csv")

    for domain in report.per_domain.values():
        print(f"domain={domain.domain_id} macro_f1={format_metric(domain.macro_f1)} n={domain.n_examples}")
    if report.pooled_macro_f1 is not None:
        print(f"pooled_macro_f1={format_metric(report.pooled_macro_f1)}")
    print(f"average_macro_f1={format_metric(report.average_macro_f1)}")
    return 0


# gradcheck

def cmd_gradcheck(args) -> int:
    with structured_logger.operation_context("gradcheck", trials=args.trials):
        cases = run_gradcheck_suite(args.trials, args.seed or 0, args.h, args.tolerance)
    for case in cases:
        print(f"{case.name:<24} max_rel_error={case.max_relative_error:.3e} {'ok' if case.passed else 'FAIL'}")
    failed = [case.name for case in cases if not case.passed]
    if failed:
        print(f"gradcheck: {len(failed)} of {len(cases)} cases failed: {', '.join(failed)}")
        return 1
    print(f"gradcheck: all {len(cases)} cases passed")
    return 0


# report

def _run_name(path: Path, taken: Dict[str, int]) -> str:
    name = path.name if path.is_dir() else (path.parent.name or path.stem)
    taken[name] = taken.get(name, 0) + 1
    return name if taken[name] == 1 else f"{name}_{taken[name]}"


def collect_inputs(paths: List[str]) -> Tuple[Dict[str, TrainLog], Dict[str, EvalReport]]:
    """
    Sort inputs into training logs and evaluation reports, keyed by run name.

    A run directory contributes its ``train_log.jsonl`` and ``eval_*.json``.

    Raises:
        SchemaError: If an input is missing or unreadable
    """
    logs, reports, taken = {}, {}, {}
    for raw in paths:
        path = Path(raw)
        if not path.exists():
            raise SchemaError(f"report input {path} does not exist")
        name = _run_name(path, taken)
        try:
            if path.is_dir():
                log_path = path / "train_log.jsonl"
                if log_path.exists():
                    logs[name] = TrainLog.read(log_path)
                for report_path in sorted(path.glob("eval_*.json")):
                    reports[f"{name}:{report_path.stem[len('eval_'):]}"] = read_report_json(report_path)
            elif path.suffix == ".jsonl":
                logs[name] = TrainLog.read(path)
            else:
                reports[name] = read_report_json(path)
        except (OSError, DataFormatError) as exc:
            raise SchemaError(f"cannot read report input {path}: {exc}") from exc
    return logs, reports


def curves_frame(logs: Dict[str, TrainLog]) -> pd.DataFrame:
    """One row per run and epoch record, with a stage column."""
    rows = []
    for run, log in logs.items():
        for record in log:
            row = {"run": run, "stage": record.stage, "epoch": record.epoch,
                   "mean_risk": record.mean_risk, "risk_variance": record.risk_variance,
                   "lambda": record.lam, "objective": record.objective}
            for k, risk in enumerate(record.env_risks):
                row[f"env_risk_{k}"] = risk
            rows.append(row)
    return pd.DataFrame(rows)


def comparison_frame(logs: Dict[str, TrainLog]) -> pd.DataFrame:
    """Runs side by side, joined on (stage, epoch)."""
    merged = None
    for run, log in logs.items():
        frame = pd.DataFrame(
            [{"stage": r.stage, "epoch": r.epoch, f"{run}_objective": r.objective,
              f"{run}_mean_risk": r.mean_risk, f"{run}_risk_variance": r.risk_variance}
             for r in log],
            columns=["stage", "epoch", f"{run}_objective", f"{run}_mean_risk", f"{run}_risk_variance"],
        )
        merged = frame if merged is None else merged.merge(frame, on=["stage", "epoch"], how="outer")
    return merged.sort_values(["stage", "epoch"]).reset_index(drop=True)


def cmd_report(args) -> int:
    out_dir = Path(args.out or "reports")
    with structured_logger.operation_context("report", inputs=len(args.inputs)):
        logs, reports = collect_inputs(args.inputs)
        if not logs and not reports:
            raise SchemaError("no training logs or evaluation reports among the inputs")
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if logs:
            curves_frame(logs).to_csv(out_dir / "curves.csv", index=False, float_format="%.17g",
                                      lineterminator="\n")
            comparison_frame(logs).to_csv(out_dir / "comparison.csv", index=False, float_format="%.17g",
                                          lineterminator="\n")
            written += ["curves.csv", "comparison.csv"]
        if reports:
            frames = [report_frame(report).assign(run=name) for name, report in reports.items()]
            domains = pd.concat(frames, ignore_index=True)
            domains = domains[["run"] + [c for c in domains.columns if c != "run"]]
            domains.to_csv(out_dir / "domains.csv", index=False, float_format="%.17g", lineterminator="\n")
            written.append("domains.csv")
    for name in written:
        print((out_dir / name).as_posix())
    return 0


__all__ = [
    'cmd_gen_data', 'cmd_train', 'cmd_eval', 'cmd_gradcheck', 'cmd_report',
    'resolve_spec', 'resolve_train_config', 'load_training_data', 'collect_inputs',
    'curves_frame', 'comparison_frame', 'format_metric', 'TRAIN_FLAG_KEYS', 'SPEC_FLAG_KEYS',
]
