"""
Command orchestration for the MGiaD toolkit.

This module contains the LabCommands class that wires experiment configs to
the analyzer, the trainer, the verification suites and the multigrid
oracle. Every command writes its report to the given stream and returns an
exit status; library errors propagate to the caller.
"""

import sys
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

import pandas as pd
import structlog

from app.analysis.complexity import count_weights
from app.analysis.scaling import BlockFamily, scaling_fit
from app.analysis.tables import detail_frame, emit_table
from app.blocks.builder import build_model
from app.core.config import get_settings
from app.core.errors import UsageError
from app.data.splits import augment_default, load_splits
from app.models.schemas import (
    PRESETS,
    ConfigFile,
    Variant,
    default_config,
    dump_config,
    load_config,
    preset,
)
from app.oracle.multigrid import GridHierarchy, measure_contraction, smoothing_factor
from app.oracle.poisson import PoissonProblem
from app.training.checkpoint import load_checkpoint, restore_checkpoint
from app.training.trainer import evaluate, train
from app.verification.suites import SUITES, run_suite

PROBLEMS = {"poisson1d": 1, "poisson2d": 2}
DEFAULT_SIZES = {1: 63, 2: 15}
DEFAULT_LEVELS = {1: 5, 2: 3}


class LabCommands:
    """Runs the CLI subcommands."""

    def __init__(self, out: Optional[TextIO] = None):
        self.settings = get_settings()
        self.logger = structlog.get_logger("mgiad.orchestration")
        self.out = out or sys.stdout

    def _emit(self, text: str, output: Optional[str] = None) -> None:
        if output:
            Path(output).parent.mkdir(parents=True, exist_ok=True)
            Path(output).write_text(text)
            self.logger.info("report written", path=output)
        else:
            self.out.write(text)

    # analyze

    def analyze(
        self,
        config_path: Optional[str] = None,
        presets: Sequence[str] = (),
        detail: bool = False,
        sweep: Optional[str] = None,
        output: Optional[str] = None,
    ) -> int:
        """Weight table of the config file and/or presets; every preset when neither is given."""
        if sweep:
            frame = pd.DataFrame(
                [
                    {
                        "family": report.family.value,
                        "exponent": round(report.exponent, 4),
                        "widths": " ".join(map(str, report.widths)),
                        "counts": " ".join(map(str, report.counts)),
                    }
                    for report in (scaling_fit(family) for family in BlockFamily)
                ]
            )
            self._emit(frame.to_csv(index=False), output)
            return 0

        named = list(presets)
        breakdowns = []
        if config_path:
            breakdowns.append(count_weights(load_config(config_path).model, Path(config_path).stem))
        if not config_path and not named:
            named = list(PRESETS)
        breakdowns.extend(count_weights(preset(name), name) for name in named)

        if detail:
            frames = []
            for breakdown in breakdowns:
                frame = detail_frame(breakdown)
                frame.insert(0, "model", breakdown.model)
                frames.append(frame)
            self._emit(pd.concat(frames, ignore_index=True).to_csv(index=False), output)
        else:
            self._emit(emit_table(breakdowns), output)
        return 0

    # train / evaluate

    def train(self, config: ConfigFile) -> int:
        """Train ``config.run.runs`` models with seeds ``seed, seed + 1, ...``."""
        out_root = Path(config.run.output_dir or self.settings.output_dir)
        out_root.mkdir(parents=True, exist_ok=True)
        (out_root / "config.yaml").write_text(dump_config(config))
        augment = augment_default(config.data)

        finals = []
        for run in range(config.run.runs):
            seed = config.run.seed + run
            train_set, test_set = load_splits(config.data, seed)
            model = build_model(config.model, seed=seed, precision=config.run.precision)
            run_dir = out_root / f"run{run}" if config.run.runs > 1 else out_root
            log = train(model, train_set, test_set, config.train, seed=seed, augment=augment, output_dir=run_dir)
            last = log.records[-1]
            finals.append({"run": run, "seed": seed, "train_acc": last.train_acc, "test_acc": last.test_acc})
            self.out.write(
                f"run {run} seed {seed}: train_acc={last.train_acc:.4f} test_acc={last.test_acc:.4f}\n"
            )

        summary = pd.DataFrame(finals)
        if config.run.runs > 1:
            summary.to_csv(out_root / "runs.csv", index=False)
            stats = summary[["train_acc", "test_acc"]].agg(["mean", "std"])
            self.out.write(stats.to_string() + "\n")
        return 0

    def evaluate(self, config: ConfigFile, checkpoint: Optional[str] = None, split: str = "test") -> int:
        model = build_model(config.model, seed=config.run.seed, precision=config.run.precision)
        if checkpoint:
            restore_checkpoint(model, load_checkpoint(checkpoint))
        train_set, test_set = load_splits(config.data, config.run.seed)
        result = evaluate(model, test_set if split == "test" else train_set)
        self.out.write(f"{split}: accuracy={result.accuracy:.4f} loss={result.loss:.4f} samples={result.samples}\n")
        return 0

    # verify

    def verify(self, suites: Sequence[str]) -> int:
        names = list(SUITES) if "all" in suites else list(suites)
        unknown = [name for name in names if name not in SUITES]
        if unknown:
            raise UsageError(f"unknown suite '{unknown[0]}'; known: {', '.join(SUITES)}")
        failed = 0
        for name in names:
            for result in run_suite(name):
                self.out.write(result.line() + "\n")
                failed += not result.passed
        self.out.write(f"{'FAILED' if failed else 'OK'}: {failed} failed check(s)\n")
        return 1 if failed else 0

    # oracle

    def oracle(
        self,
        problem: str = "poisson1d",
        levels: Optional[int] = None,
        omega: float = 2.0 / 3.0,
        size: Optional[int] = None,
        cycles: int = 10,
        eta_pre: int = 1,
        eta_post: int = 1,
        seed: int = 0,
        exact_start: bool = False,
        output: Optional[str] = None,
    ) -> int:
        """Residual history of repeated V-cycles (pure Jacobi with one level)."""
        if problem not in PROBLEMS:
            raise UsageError(f"unknown problem '{problem}'; expected one of {', '.join(PROBLEMS)}")
        dimension = PROBLEMS[problem]
        poisson = PoissonProblem(dimension, size or DEFAULT_SIZES[dimension], seed=seed)
        hierarchy = GridHierarchy.build(poisson, levels or DEFAULT_LEVELS[dimension])
        u0 = poisson.exact_solution if exact_start else None
        report = measure_contraction(poisson, hierarchy, omega, eta_pre, eta_post, cycles=cycles, u0=u0)
        frame = report.to_frame()
        if output:
            self._emit(frame.to_csv(index=False), output)
        header: List[str] = [
            f"problem={problem} n={poisson.size} levels={hierarchy.depth} grids={hierarchy.sizes}",
            f"method={report.method} omega={omega:.6g}",
            f"smoothing factor (high-frequency mode) = {smoothing_factor(poisson, omega):.4f}",
        ]
        self.out.write("\n".join(header) + "\n")
        self.out.write(frame.to_string(index=False, na_rep="-", float_format=lambda v: f"{v:.3e}") + "\n")
        first, last = report.window
        self.out.write(f"contraction factor (cycles {first}-{last}) = {report.mean_factor:.4f}\n")
        return 0

    # export-config

    def export_config(
        self, variant: Optional[str] = None, preset_name: Optional[str] = None, output: Optional[str] = None
    ) -> int:
        if preset_name:
            config = ConfigFile(model=preset(preset_name))
        else:
            config = default_config(Variant(variant or Variant.MGIAD.value))
        self._emit(dump_config(config), output)
        return 0


def apply_overrides(config: ConfigFile, **overrides) -> ConfigFile:
    """Copy of ``config`` with CLI flags (``section__field=value``) applied; ``None`` is skipped."""
    sections = {}
    for key, value in overrides.items():
        if value is None:
            continue
        section, name = key.split("__", 1)
        sections.setdefault(section, {})[name] = value
    data = config.model_dump()
    for section, values in sections.items():
        data[section].update(values)
    return ConfigFile.model_validate(data)

