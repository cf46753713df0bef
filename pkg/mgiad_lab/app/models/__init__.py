"""
Configuration models for MGiaD experiments.

This package contains the pydantic models that describe architectures,
training runs and weight breakdowns.
"""

from .schemas import (
    PRESETS,
    Activation,
    ConfigFile,
    DataConfig,
    DatasetKind,
    LadderMode,
    ModelConfig,
    OperatorCount,
    RunConfig,
    ScheduleKind,
    SharingPolicy,
    TrainConfig,
    Variant,
    WeightBreakdown,
    default_config,
    dump_config,
    load_config,
    parse_config,
    preset,
)

__all__ = [
    "PRESETS",
    "Activation",
    "ConfigFile",
    "DataConfig",
    "DatasetKind",
    "LadderMode",
    "ModelConfig",
    "OperatorCount",
    "RunConfig",
    "ScheduleKind",
    "SharingPolicy",
    "TrainConfig",
    "Variant",
    "WeightBreakdown",
    "default_config",
    "dump_config",
    "load_config",
    "parse_config",
    "preset",
]
