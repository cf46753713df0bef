"""
Model construction from a ``ModelConfig``.

``resolve_plan`` performs every structural validation; the complexity
analyzer calls it too, so an invalid config fails the same way whether it
is built or only counted.
"""

from typing import List

import structlog

from app.blocks.hierarchy import channel_ladder, check_group_size
from app.blocks.networks import MGiaD, MgNet, ModelPlan, Network, ResNet
from app.blocks.units import LayerFactory
from app.core.errors import ConfigurationError
from app.core.seeding import substream
from app.engine.tensor import ParameterRegistry, Precision
from app.models.schemas import ModelConfig, Variant

logger = structlog.get_logger("mgiad.blocks.builder")

DEFAULT_G_S = 4
DEFAULT_C_K = 64

NETWORKS = {Variant.RESNET: ResNet, Variant.MGNET: MgNet, Variant.MGIAD: MGiaD}


def _positive(name: str, value: int, minimum: int = 1) -> None:
    if value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")


def resolve_plan(config: ModelConfig) -> ModelPlan:
    """Validate ``config`` and return its scaled channel plan."""
    _positive("levels", config.levels)
    if len(config.channels) != config.levels:
        raise ConfigurationError(
            f"channel plan {config.channels} has {len(config.channels)} entries for L={config.levels}"
        )
    for width in config.channels:
        _positive("channel width", width)
    _positive("channel scale (lambda)", config.channel_scale)
    _positive("num_classes", config.num_classes)
    _positive("input_channels", config.input_channels)
    _positive("input_size", config.input_size)

    widths: List[int] = [w * config.channel_scale for w in config.channels]
    variant = config.variant
    if variant in (Variant.RESNET, Variant.MGNET):
        _positive("nu", config.nu)
    if variant is Variant.RESNET:
        return ModelPlan(widths=widths, ladders=[[w] for w in widths])

    for level, (width, nxt) in enumerate(zip(widths, widths[1:]), start=1):
        if nxt % width:
            raise ConfigurationError(
                f"level {level + 1} width {nxt} is not a multiple of level {level} width {width}"
            )

    if variant is Variant.MGNET:
        g_s = config.g_s
        if g_s is not None:
            _positive("g_s", g_s)
            for width in widths:
                if width % g_s:
                    raise ConfigurationError(f"width {width} is not divisible by g_s={g_s}")
        return ModelPlan(widths=widths, ladders=[[w] for w in widths], g_s=g_s)

    _positive("eta_pre", config.eta_pre)
    _positive("eta_post", config.eta_post, minimum=0)
    g_s = DEFAULT_G_S if config.g_s is None else config.g_s
    c_K = DEFAULT_C_K if config.c_K is None else config.c_K
    _positive("g_s", g_s)
    ladders = []
    for level, width in enumerate(widths, start=1):
        ladder = channel_ladder(width, c_K, config.ladder)
        check_group_size(ladder, g_s, f"level {level}")
        ladders.append(ladder)
    return ModelPlan(widths=widths, ladders=ladders, g_s=g_s, c_K=c_K)


def build_model(
    config: ModelConfig, seed: int = 0, precision: Precision = Precision.TRAINING
) -> Network:
    """Construct and initialize the network described by ``config``."""
    plan = resolve_plan(config)
    factory = LayerFactory(
        ParameterRegistry(),
        substream(seed, "init"),
        dtype=Precision(precision).dtype,
        activation=config.activation.value,
        batch_norm=config.batch_norm,
    )
    model = NETWORKS[config.variant](config, plan, factory)
    logger.info(
        "model built",
        variant=config.variant.value,
        widths=plan.widths,
        parameters=model.parameter_count(),
        precision=Precision(precision).value,
    )
    return model
