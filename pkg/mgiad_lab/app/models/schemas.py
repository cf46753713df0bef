"""
Data models and schemas for MGiaD experiments.

This module defines the experiment configuration (model, training, data and
run sections), the canonical YAML form of that configuration, the named
presets for every reference architecture, and the weight breakdown produced
by the complexity analyzer.
"""

from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field

from app.core.config import get_settings
from app.core.errors import ConfigurationError
from app.engine.tensor import Precision


class Variant(str, Enum):
    """Architecture family."""

    RESNET = "resnet"
    MGNET = "mgnet"
    MGIAD = "mgiad"


class Activation(str, Enum):
    """Nonlinearity applied after every normalized convolution."""

    RELU = "relu"
    IDENTITY = "identity"


class LadderMode(str, Enum):
    """How the in-channel ladder descends to the coarsest width."""

    EXACT = "exact"
    FLOOR = "floor"


class DatasetKind(str, Enum):
    """Supported dataset sources."""

    SYNTH = "synth"
    CIFAR10 = "cifar10"
    CIFAR100 = "cifar100"
    FASHION_MNIST = "fashion_mnist"


class ScheduleKind(str, Enum):
    """Learning-rate schedule."""

    COSINE = "cosine"
    STEP = "step"


class SharingPolicy(BaseModel):
    """Weight sharing of A and B across the smoothing steps of one level."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    share_A: bool = Field(default=True)
    share_B: bool = Field(default=True)

    @property
    def label(self) -> str:
        if self.share_A and self.share_B:
            return "A,B"
        if self.share_A:
            return "A"
        if self.share_B:
            return "B"
        return "none"


class ModelConfig(BaseModel):
    """Declarative description of one architecture."""

    model_config = ConfigDict(extra="forbid")

    variant: Variant = Field(default=Variant.MGIAD)
    levels: int = Field(default=4, description="Number of resolution levels L")
    channels: List[int] = Field(default_factory=lambda: [64, 128, 256, 256])
    channel_scale: int = Field(default=1, description="Channel multiplier lambda")
    nu: int = Field(default=2, description="Smoothing steps (blocks) per level")
    eta_pre: int = Field(default=1)
    eta_post: int = Field(default=1)
    g_s: Optional[int] = Field(default=None, description="Group size; None means dense (mgiad: 4)")
    c_K: Optional[int] = Field(default=None, description="Coarsest in-channel width (mgiad: 64)")
    ladder: LadderMode = Field(default=LadderMode.EXACT)
    sharing: SharingPolicy = Field(default_factory=SharingPolicy)
    fas: bool = Field(default=True)
    num_classes: int = Field(default=10)
    input_channels: int = Field(default=3)
    input_size: int = Field(default=32)
    activation: Activation = Field(default=Activation.RELU)
    batch_norm: bool = Field(default=True)


class TrainConfig(BaseModel):
    """Optimizer, schedule and loop settings."""

    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(default=128, ge=1)
    epochs: int = Field(default=400, ge=1)
    lr: float = Field(default=0.05, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    schedule: ScheduleKind = Field(default=ScheduleKind.COSINE)
    step_factor: float = Field(default=0.1, gt=0.0)
    step_period: int = Field(default=25, ge=1)
    checkpoint_every: int = Field(default=0, ge=0, description="Epochs between checkpoints; 0 = final only")
    divergence_factor: float = Field(default=10.0, gt=1.0)
    divergence_patience: int = Field(default=3, ge=1)


class DataConfig(BaseModel):
    """Dataset source and preprocessing."""

    model_config = ConfigDict(extra="forbid")

    kind: DatasetKind = Field(default=DatasetKind.SYNTH)
    data_dir: Optional[str] = Field(default=None, description="Defaults to settings.data_dir")
    augment: Optional[bool] = Field(default=None, description="None picks the per-dataset default")
    pad_to: Optional[int] = Field(default=None, description="Zero-pad square images to this size")
    train_limit: Optional[int] = Field(default=None, ge=1)
    test_limit: Optional[int] = Field(default=None, ge=1)
    synth_classes: int = Field(default=10, ge=1)
    synth_per_class: int = Field(default=32, ge=1)
    synth_size: int = Field(default=32, ge=1)
    synth_channels: int = Field(default=3, ge=1)
    synth_noise: float = Field(default=1.0, ge=0.0)


class RunConfig(BaseModel):
    """Seed, precision and output location of a run."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default_factory=lambda: get_settings().default_seed)
    precision: Precision = Field(default=Precision.TRAINING)
    output_dir: Optional[str] = Field(default=None, description="Defaults to settings.output_dir")
    runs: int = Field(default=1, ge=1)


class ConfigFile(BaseModel):
    """One experiment: model, training, data and run sections."""

    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    run: RunConfig = Field(default_factory=RunConfig)


def dump_config(config: ConfigFile) -> str:
    """Canonical YAML text: fixed section and key order."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False, default_flow_style=None)


def parse_config(text: str) -> ConfigFile:
    """Parse YAML text; unknown keys raise pydantic's ValidationError."""
    document = yaml.safe_load(text) or {}
    if not isinstance(document, dict):
        raise ConfigurationError("config document must be a mapping of sections")
    return ConfigFile.model_validate(document)


def load_config(path: Union[str, Path]) -> ConfigFile:
    """Read a config file; a missing file raises FileNotFoundError."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


# Presets

CIFAR_PLAN = [64, 128, 256, 256]
RESNET18_PLAN = [64, 128, 256, 512]
SMALL_PLAN = [16, 32, 64]


def _mgnet(share_b: bool, plan: List[int], nu: int, g_s: Optional[int] = None) -> ModelConfig:
    return ModelConfig(
        variant=Variant.MGNET,
        levels=len(plan),
        channels=plan,
        nu=nu,
        g_s=g_s,
        c_K=None,
        sharing=SharingPolicy(share_A=True, share_B=share_b),
    )


def _mgiad(c_k: int, g_s: int, scale: int = 1, eta_post: int = 1, **overrides) -> ModelConfig:
    ladder = LadderMode.EXACT if _is_power_of_two(scale) else LadderMode.FLOOR
    fields = dict(
        variant=Variant.MGIAD,
        levels=4,
        channels=CIFAR_PLAN,
        channel_scale=scale,
        g_s=g_s,
        c_K=c_k,
        eta_pre=1,
        eta_post=eta_post,
        ladder=ladder,
    )
    fields.update(overrides)
    fields["levels"] = len(fields["channels"])
    return ModelConfig(**fields)


def _is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


def _build_presets() -> Dict[str, ModelConfig]:
    presets: Dict[str, ModelConfig] = {
        "resnet20": ModelConfig(
            variant=Variant.RESNET, levels=3, channels=SMALL_PLAN, nu=3, g_s=None, c_K=None
        ),
        "resnet18": ModelConfig(
            variant=Variant.RESNET, levels=4, channels=RESNET18_PLAN, nu=2, g_s=None, c_K=None
        ),
        "mgnet-a-3": _mgnet(False, SMALL_PLAN, 3),
        "mgnet-ab-3": _mgnet(True, SMALL_PLAN, 3),
        "mgnet-a-4": _mgnet(False, CIFAR_PLAN, 2),
        "mgnet-ab-4": _mgnet(True, CIFAR_PLAN, 2),
    }
    for g_s in (8, 16, 32, 64):
        presets[f"mgnet-ab-4-g{g_s}"] = _mgnet(True, CIFAR_PLAN, 2, g_s=g_s)

    for g_s, coarsest in ((4, (4, 8, 16, 32, 64)), (8, (8, 16, 32, 64)), (16, (16, 32, 64)),
                          (32, (32, 64)), (64, (64,))):
        for c_k in coarsest:
            presets[f"mgiad-c{c_k}-g{g_s}"] = _mgiad(c_k, g_s)
    for g_s in (4, 8):
        for scale in (2, 3):
            presets[f"mgiad-c64-g{g_s}-l{scale}"] = _mgiad(64, g_s, scale)
        for eta_post in (2, 3):
            presets[f"mgiad-c64-g{g_s}-l3-post{eta_post}"] = _mgiad(64, g_s, 3, eta_post)

    for g_s in (4, 8, 16):
        presets[f"mgiad-fmnist-c16-g{g_s}"] = _mgiad(16, g_s, channels=SMALL_PLAN, input_channels=1)
    for g_s in (8, 64):
        for scale in (1, 2, 3):
            presets[f"mgiad-cifar100-c64-g{g_s}-l{scale}"] = _mgiad(64, g_s, scale, num_classes=100)
    return presets


PRESETS: Dict[str, ModelConfig] = _build_presets()

VARIANT_DEFAULTS = {
    Variant.RESNET: "resnet18",
    Variant.MGNET: "mgnet-ab-4",
    Variant.MGIAD: "mgiad-c64-g4",
}


def preset(name: str) -> ModelConfig:
    """Return a copy of a named preset."""
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset '{name}'; known: {', '.join(sorted(PRESETS))}")
    return PRESETS[name].model_copy(deep=True)


def default_config(variant: Variant = Variant.MGIAD) -> ConfigFile:
    """Canonical experiment config for a variant with the standard CIFAR training defaults."""
    return ConfigFile(model=preset(VARIANT_DEFAULTS[Variant(variant)]))


# Weight breakdowns

class OperatorCount(BaseModel):
    """Learnable scalars of one shared id."""

    name: str
    role: str
    count: int
    level: Optional[int] = None
    channel_level: Optional[int] = None


class WeightBreakdown(BaseModel):
    """Per-operator parameter counts of one architecture."""

    model: str
    c_K: Optional[int] = None
    g_s: Optional[int] = None
    channel_scale: int = 1
    operators: List[OperatorCount] = Field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(op.count for op in self.operators)

    def by_role(self) -> Dict[str, int]:
        totals: Dict[str, int] = {}
        for op in self.operators:
            totals[op.role] = totals.get(op.role, 0) + op.count
        return totals

    def by_level(self) -> Dict[Optional[int], int]:
        totals: Dict[Optional[int], int] = {}
        for op in self.operators:
            totals[op.level] = totals.get(op.level, 0) + op.count
        return totals

    def by_channel_level(self) -> Dict[tuple, int]:
        totals: Dict[tuple, int] = {}
        for op in self.operators:
            if op.channel_level is None:
                continue
            key = (op.level, op.channel_level)
            totals[key] = totals.get(key, 0) + op.count
        return totals
