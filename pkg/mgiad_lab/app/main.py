"""
Main entry point for the MGiaD toolkit.

This module builds the command-line interface (``analyze``, ``train``,
``evaluate``, ``verify``, ``oracle`` and ``export-config``) and maps library
errors onto the stable exit codes: 0 on success, 1 when a check or a
training run fails, 2 for usage and configuration errors.
"""

import argparse
import sys
from typing import List, Optional, TextIO

import structlog
import yaml
from pydantic import ValidationError

from app.core.config import get_settings, setup_logging
from app.core.errors import (
    CheckpointError,
    ConfigurationError,
    DatasetParseError,
    OracleRefusalError,
    TrainingError,
    UsageError,
)
from app.models.schemas import PRESETS, DatasetKind, ScheduleKind, Variant, default_config, load_config
from app.orchestration.commands import PROBLEMS, LabCommands, apply_overrides
from app.verification.suites import SUITES

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

USAGE_ERRORS = (
    FileNotFoundError,
    ConfigurationError,
    UsageError,
    OracleRefusalError,
    DatasetParseError,
    CheckpointError,
    ValidationError,
    yaml.YAMLError,
)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting."""

    def error(self, message: str):
        raise UsageError(message)


def _experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config (YAML); defaults to the mgiad config")
    parser.add_argument("--data", dest="data__kind", choices=[k.value for k in DatasetKind])
    parser.add_argument("--data-dir", dest="data__data_dir")
    parser.add_argument("--train-limit", dest="data__train_limit", type=int)
    parser.add_argument("--test-limit", dest="data__test_limit", type=int)
    parser.add_argument("--seed", dest="run__seed", type=int)
    parser.add_argument("--output-dir", dest="run__output_dir")
    parser.add_argument("--batch-size", dest="train__batch_size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mgiad", description="Multigrid-inspired CNNs: analysis, training and verification.")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None)
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    commands.required = True

    analyze = commands.add_parser("analyze", help="weight tables of configs and presets")
    analyze.add_argument("config", nargs="?", help="experiment config (YAML)")
    analyze.add_argument("--preset", action="append", default=[], choices=sorted(PRESETS), metavar="NAME")
    analyze.add_argument("--detail", action="store_true", help="per-operator breakdown")
    analyze.add_argument("--sweep", choices=["channels"], help="channel-scaling exponent report")
    analyze.add_argument("--output", help="write the CSV here instead of stdout")

    train = commands.add_parser("train", help="train a model and write the run log")
    _experiment_flags(train)
    train.add_argument("--epochs", dest="train__epochs", type=int)
    train.add_argument("--lr", dest="train__lr", type=float)
    train.add_argument("--momentum", dest="train__momentum", type=float)
    train.add_argument("--weight-decay", dest="train__weight_decay", type=float)
    train.add_argument("--schedule", dest="train__schedule", choices=[k.value for k in ScheduleKind])
    train.add_argument("--checkpoint-every", dest="train__checkpoint_every", type=int)
    train.add_argument("--runs", dest="run__runs", type=int, help="repeated runs with seeds seed, seed+1, ...")

    evaluate = commands.add_parser("evaluate", help="accuracy of a (checkpointed) model")
    _experiment_flags(evaluate)
    evaluate.add_argument("--checkpoint", help="MGCK file; omitted means freshly initialized weights")
    evaluate.add_argument("--split", choices=["train", "test"], default="test")

    verify = commands.add_parser("verify", help="run invariant suites")
    verify.add_argument("--suite", action="append", choices=sorted(SUITES) + ["all"], default=None)

    oracle = commands.add_parser("oracle", help="multigrid convergence on Poisson problems")
    oracle.add_argument("--problem", choices=sorted(PROBLEMS), default="poisson1d")
    oracle.add_argument("--levels", type=int, default=None, help="default: 5 in 1-D, 3 in 2-D")
    oracle.add_argument("--omega", type=float, default=2.0 / 3.0)
    oracle.add_argument("--size", type=int, default=None, help="points per axis (default: 63 in 1-D, 15 in 2-D)")
    oracle.add_argument("--cycles", type=int, default=10)
    oracle.add_argument("--eta-pre", type=int, default=1)
    oracle.add_argument("--eta-post", type=int, default=1)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--exact-start", action="store_true", help="start from the direct solution")
    oracle.add_argument("--output", help="also write the residual history as CSV")

    export = commands.add_parser("export-config", help="print a canonical config")
    source = export.add_mutually_exclusive_group()
    source.add_argument("--variant", choices=[v.value for v in Variant])
    source.add_argument("--preset", choices=sorted(PRESETS), metavar="NAME")
    export.add_argument("--output")
    return parser


def _experiment(args: argparse.Namespace):
    config = load_config(args.config) if args.config else default_config()
    overrides = {key: value for key, value in vars(args).items() if "__" in key}
    return apply_overrides(config, **overrides)


def run(args: argparse.Namespace, out: TextIO) -> int:
    commands = LabCommands(out)
    if args.command == "analyze":
        return commands.analyze(args.config, args.preset, args.detail, args.sweep, args.output)
    if args.command == "train":
        return commands.train(_experiment(args))
    if args.command == "evaluate":
        return commands.evaluate(_experiment(args), args.checkpoint, args.split)
    if args.command == "verify":
        return commands.verify(args.suite or ["all"])
    if args.command == "oracle":
        return commands.oracle(
            problem=args.problem,
            levels=args.levels,
            omega=args.omega,
            size=args.size,
            cycles=args.cycles,
            eta_pre=args.eta_pre,
            eta_post=args.eta_post,
            seed=args.seed,
            exact_start=args.exact_start,
            output=args.output,
        )
    return commands.export_config(args.variant, args.preset, args.output)


def main(argv: Optional[List[str]] = None, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    """Run the CLI and return its exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        err.write(f"error: {e}\n")
        return EXIT_USAGE

    setup_logging(args.log_level)
    logger = structlog.get_logger("mgiad.main")
    settings = get_settings()
    logger.debug("command started", command=args.command, app=settings.app_name, version=settings.app_version)

    try:
        return run(args, out)
    except USAGE_ERRORS as e:
        err.write(f"error: {e}\n")
        return EXIT_USAGE
    except TrainingError as e:
        logger.error("training failed", error=str(e))
        err.write(f"error: {e}\n")
        return EXIT_FAILED
