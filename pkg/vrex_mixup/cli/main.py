"""
Command-line entry point: data generation, two-stage training, evaluation,
gradient verification, reporting and seed sweeps.
"""

import argparse
import sys
import uuid
from typing import List, Optional

from config import TOOL_VERSION
from utilities.logger import set_log_level
from utilities.structured_logger import get_structured_logger
from ..data.synthetic import LABEL_SAMPLING_MODES
from ..errors import VRexMixupError
from ..metrics.classification import WEIGHTING_MODES
from ..objectives.mixup import PAIRING_MODES
from ..training.config import METHODS, OPTIMIZERS
from .commands import cmd_eval, cmd_gen_data, cmd_gradcheck, cmd_report, cmd_train
from .sweep import cmd_sweep

structured_logger = get_structured_logger("cli")

EPILOG = """
Examples:
  python app.py gen-data --out data --seed 0             # Synthetic benchmark CSVs
  python app.py train --data data --out runs/full        # Full two-stage method
  python app.py train --method erm --out runs/erm        # ERM baseline on generated data
  python app.py train --set vrex.lambda_max=10 --set mixup.alpha=0.4
  python app.py eval --checkpoint runs/full/checkpoints/final.json --data data --pooled
  python app.py gradcheck --trials 100                   # Finite-difference verification
  python app.py report runs/erm runs/full --out reports  # Plot-ready CSVs
  python app.py sweep --seeds 0,1,2,3,4 --methods erm,vrex_mixup --jobs 4
"""


def _u64(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned integer, got {text!r}")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key = value configuration file')
    common.add_argument('--seed', type=_u64, help='Seed for data generation, initialization and sampling')
    common.add_argument('--out', help='Output directory')
    return common


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--data', help='Dataset directory (generated in-process when omitted)')
    parser.add_argument('--stage1-epochs', type=int, help='VREx pretraining epochs')
    parser.add_argument('--stage2-epochs', type=int, help='Mixup fine-tuning epochs')
    parser.add_argument('--lambda-max', type=float, help='Final VREx penalty weight')
    parser.add_argument('--warmup-epochs', type=int, help='Epochs of linear penalty warm-up')
    parser.add_argument('--alpha', type=float, help='Beta(alpha, alpha) mixup parameter')
    parser.add_argument('--pairing', choices=PAIRING_MODES, help='Mixup pairing rule')
    parser.add_argument('--batch-size', type=int, help='Examples per environment per step')
    parser.add_argument('--lr-stage1', type=float, help='Stage 1 learning rate')
    parser.add_argument('--lr-stage2', type=float, help='Stage 2 learning rate')
    parser.add_argument('--optimizer', choices=OPTIMIZERS, help='Optimizer')
    parser.add_argument('--checkpoint-every', type=int, help='Checkpoint period in epochs (0 = boundaries only)')
    parser.add_argument('--weighting', choices=WEIGHTING_MODES, help='Average over domains')
    parser.add_argument('--set', action='append', metavar='KEY=VALUE', help='Dotted config override (repeatable)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrex-mixup",
        description="Two-stage domain generalization: VREx pretraining then Mixup fine-tuning",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {TOOL_VERSION}")
    parser.add_argument('--log-level', help='Override LOG_LEVEL for this invocation')
    commands = parser.add_subparsers(dest="command", metavar="command")
    common = _common()

    gen = commands.add_parser('gen-data', parents=[common], help='Generate the synthetic spurious benchmark')
    gen.add_argument('--n-train-envs', type=int, help='Number of source domains')
    gen.add_argument('--train-correlations', help='Comma list of per-domain spurious agreement p_e')
    gen.add_argument('--test-correlation', type=float, help='Spurious agreement in the test domain')
    gen.add_argument('--n-invariant-dims', type=int, help='Invariant feature count')
    gen.add_argument('--invariant-mean', type=float)
    gen.add_argument('--invariant-std', type=float)
    gen.add_argument('--spurious-mean', type=float)
    gen.add_argument('--spurious-std', type=float)
    gen.add_argument('--train-sizes', help='Comma list of training sizes per domain')
    gen.add_argument('--val-sizes', help='Comma list of validation sizes per domain')
    gen.add_argument('--test-size', type=int, help='Test domain size (0 = none)')
    gen.add_argument('--class-balance', type=float, help='Class 1 share in training and test')
    gen.add_argument('--val-class-balance', type=float, help='Class 1 share in validation')
    gen.add_argument('--label-sampling', choices=LABEL_SAMPLING_MODES)
    gen.set_defaults(handler=cmd_gen_data)

    train = commands.add_parser('train', parents=[common], help='Run two-stage training')
    _add_training_flags(train)
    train.add_argument('--method', choices=METHODS, default='vrex_mixup', help='Method preset')
    train.add_argument('--resume', help='Checkpoint to continue from')
    train.add_argument('--manifest', help='Rerun exactly what a previous train manifest describes')
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser('eval', parents=[common], help='Evaluate a checkpoint')
    evaluate.add_argument('--checkpoint', required=True)
    evaluate.add_argument('--data', required=True, help='Dataset directory')
    evaluate.add_argument('--split', choices=['train', 'val', 'test'], default='val')
    evaluate.add_argument('--weighting', choices=WEIGHTING_MODES, default='unweighted')
    evaluate.add_argument('--pooled', action='store_true', help='Also report pooled macro F1')
    evaluate.set_defaults(handler=cmd_eval)

    gradcheck = commands.add_parser('gradcheck', parents=[common], help='Verify gradients numerically')
    gradcheck.add_argument('--trials', type=int, default=100)
    gradcheck.add_argument('--h', type=float, default=1e-5)
    gradcheck.add_argument('--tolerance', type=float, default=1e-4)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    report = commands.add_parser('report', parents=[common], help='Plot-ready CSV summaries')
    report.add_argument('inputs', nargs='+', help='Run directories, train_log.jsonl or eval_*.json files')
    report.set_defaults(handler=cmd_report)

    sweep = commands.add_parser('sweep', parents=[common], help='Train methods over several seeds')
    _add_training_flags(sweep)
    sweep.add_argument('--seeds', default='0,1,2,3,4')
    sweep.add_argument('--methods', default='erm,vrex_mixup')
    sweep.add_argument('--jobs', type=int, help='Parallel worker processes')
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one command.

    Returns:
        0 on success, 1 on runtime failure, 2 on usage or configuration errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    if args.log_level:
        set_log_level(args.log_level)

    try:
        return args.handler(args)
    except VRexMixupError as exc:
        error_id = str(uuid.uuid4())[:8]
        structured_logger.error("Command failed", exception=exc, command=args.command,
                                error_id=error_id, exit_code=exc.exit_code)
        print(f"error [{error_id}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        error_id = str(uuid.uuid4())[:8]
        structured_logger.error("Command failed", exception=exc, command=args.command, error_id=error_id)
        print(f"error [{error_id}]: {exc}", file=sys.stderr)
        return 1


__all__ = ['build_parser', 'main']
