"""
Seed sweeps: every (method, seed) pair trained in its own output directory,
optionally across a process pool.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from tqdm import tqdm

from config import get_runtime_config
from utilities.structured_logger import get_structured_logger
from ..data.csv_io import SPLIT_FILES, infer_feature_dim
from ..training.config import METHODS, TrainConfig, apply_method, seeded
from ..training.trainer import run_two_stage
from ..errors import UsageError
from .commands import format_metric, load_training_data, resolve_train_config

structured_logger = get_structured_logger("sweep")

SUMMARY_FILE = "sweep_summary.csv"


@dataclass
class SweepJob:
    method: str
    seed: int
    config: Dict[str, Any]
    data: Optional[str]
    out_dir: str
    spec: Optional[Dict[str, Any]] = None


def run_sweep_job(job: SweepJob) -> Dict[str, Any]:
    """
    Train one (method, seed) pair; runs in a worker process.

    Without ``data`` the bundle is generated from ``spec``, or from the default
    generator seeded with the job seed when ``spec`` is None.
    """
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = apply_method(seeded(TrainConfig.from_dict(job.config), job.seed), job.method)
    bundle, _ = load_training_data(job.data, job.spec, config.model.num_classes, job.seed, out_dir)
    config = config.check()
    result = run_two_stage(bundle, config, out_dir)
    return {
        "method": job.method,
        "seed": job.seed,
        "val_average_macro_f1": result.val_report.average_macro_f1,
        "test_macro_f1": result.test_report.average_macro_f1 if result.test_report else float("nan"),
        "final_objective": result.log.records[-1].objective if len(result.log) else float("nan"),
    }


def _parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise UsageError(f"--seeds expects comma-separated integers, got {text!r}")
    if not seeds:
        raise UsageError("--seeds needs at least one seed")
    return seeds


def _parse_methods(text: str) -> List[str]:
    methods = [item.strip() for item in text.split(",") if item.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"--methods must name some of {METHODS}, got {text!r}")
    return methods


def cmd_sweep(args) -> int:
    out_dir = Path(args.out or "runs/sweep")
    seeds = _parse_seeds(args.seeds)
    methods = _parse_methods(args.methods)
    jobs = args.jobs or get_runtime_config()["default_jobs"]
    # Seed and method are applied per job.
    args.seed, args.method = None, "vrex_mixup"
    base, explicit = resolve_train_config(args)
    if "model.input_dim" not in explicit and args.data:
        feature_dim = infer_feature_dim(Path(args.data) / SPLIT_FILES["train"])
        base = replace(base, model=replace(base.model, input_dim=feature_dim))

    work = [
        SweepJob(method, seed, base.to_dict(), args.data, str(out_dir / method / f"seed{seed}"))
        for method in methods for seed in seeds
    ]
    rows = []
    with structured_logger.operation_context("sweep", runs=len(work), jobs=jobs):
        progress = tqdm(total=len(work), desc="sweep", unit="run")
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                futures = [executor.submit(run_sweep_job, job) for job in work]
                for future in as_completed(futures):
                    rows.append(future.result())
                    progress.update(1)
        else:
            for job in work:
                rows.append(run_sweep_job(job))
                progress.update(1)
        progress.close()

    summary = pd.DataFrame(rows).sort_values(["method", "seed"]).reset_index(drop=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out_dir / SUMMARY_FILE, index=False, float_format="%.17g", lineterminator="\n")
    medians = summary.groupby("method", sort=False)[["test_macro_f1", "val_average_macro_f1"]].median()
    for method in methods:
        print(
            f"method={method} median_test_macro_f1={format_metric(medians.loc[method, 'test_macro_f1'])} "
            f"median_val_average_macro_f1={format_metric(medians.loc[method, 'val_average_macro_f1'])}"
        )
    return 0


__all__ = ['SweepJob', 'run_sweep_job', 'cmd_sweep', 'SUMMARY_FILE']
