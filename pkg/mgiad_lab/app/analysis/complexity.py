"""
Closed-form parameter counts.

``count_weights`` walks the same structure ``build_model`` creates, using the
same shared ids and roles, but only multiplies extents. Shared operators
appear once. Batch-normalization entries carry both gamma and beta.
"""

from typing import List, Optional

import structlog

from app.blocks.builder import resolve_plan
from app.models.schemas import ModelConfig, OperatorCount, Variant, WeightBreakdown

logger = structlog.get_logger("mgiad.analysis.complexity")


def conv_count(in_channels: int, out_channels: int, stencil: int = 3, groups: int = 1) -> int:
    """``s * s' * (c_in / g) * c_out``."""
    return stencil * stencil * (in_channels // groups) * out_channels


class _Counter:
    """Collects operator records in construction order."""

    def __init__(self, batch_norm: bool):
        self.batch_norm = batch_norm
        self.operators: List[OperatorCount] = []

    def conv(self, name, role, count, level=None, channel_level=None) -> None:
        self.operators.append(
            OperatorCount(name=name, role=role, count=count, level=level, channel_level=channel_level)
        )

    def norm(self, name, channels, level=None, channel_level=None) -> None:
        if self.batch_norm:
            self.conv(name, "BN", 2 * channels, level, channel_level)


def _resnet(counter: _Counter, config: ModelConfig, widths: List[int]) -> None:
    in_channels = widths[0]
    for level, width in enumerate(widths, start=1):
        for index in range(1, config.nu + 1):
            scope = f"level{level}.block{index}"
            stride = 2 if level > 1 and index == 1 else 1
            counter.conv(f"{scope}.conv1", "A", conv_count(in_channels, width), level)
            counter.norm(f"{scope}.bn1", width, level)
            counter.conv(f"{scope}.conv2", "B", conv_count(width, width), level)
            counter.norm(f"{scope}.bn2", width, level)
            if stride != 1 or in_channels != width:
                counter.conv(f"{scope}.shortcut", "shortcut", conv_count(in_channels, width, 1), level)
                counter.norm(f"{scope}.shortcut.bn", width, level)
            in_channels = width


def _smoothing_norms(counter, scope, width, steps, level, channel_level=None, zero_start=False) -> None:
    for i in range(1, steps + 1):
        if i > 1 or not zero_start:
            counter.norm(f"{scope}.step{i}.bn_A", width, level, channel_level)
        counter.norm(f"{scope}.step{i}.bn_B", width, level, channel_level)


def _transfer(counter, level, width, next_width, fas) -> None:
    scope = f"transfer{level}"
    counter.norm(f"{scope}.residual.bn", width, level)
    counter.conv(f"{scope}.R", "R", conv_count(width, next_width, groups=width), level)
    if fas:
        counter.conv(f"{scope}.Pi", "Pi", conv_count(width, next_width, groups=width), level)


def _mgnet(counter: _Counter, config: ModelConfig, widths: List[int], g_s: Optional[int]) -> None:
    nu = config.nu
    for level, width in enumerate(widths, start=1):
        groups = width // g_s if g_s else 1
        count = conv_count(width, width, groups=groups)
        zero_start = level == 1 or not config.fas
        for name, shared, role in (("A", config.sharing.share_A, "A"), ("B", config.sharing.share_B, "B")):
            if shared:
                counter.conv(f"level{level}.{name}", role, count, level)
            else:
                first = 2 if name == "A" and zero_start and nu > 1 else 1
                for i in range(first, nu + 1):
                    counter.conv(f"level{level}.{name}{i}", role, count, level)
        _smoothing_norms(counter, f"level{level}", width, nu, level, zero_start=zero_start)
        if level < len(widths):
            _transfer(counter, level, width, widths[level], config.fas)


def _mgiad(counter: _Counter, config: ModelConfig, widths: List[int], ladders, g_s: int) -> None:
    for level, (width, ladder) in enumerate(zip(widths, ladders), start=1):
        for kappa, w in enumerate(ladder, start=1):
            name = f"level{level}.ch{kappa}"
            coarsest = kappa == len(ladder)
            groups = 1 if coarsest else w // g_s
            counter.conv(f"{name}.A_hat", "A_hat", conv_count(w, w, groups=groups), level, kappa)
            counter.conv(f"{name}.B_hat", "B_hat", conv_count(w, w, groups=groups), level, kappa)
            zero_start = kappa == 1 and (level == 1 or not config.fas)
            _smoothing_norms(counter, f"{name}.pre", w, config.eta_pre, level, kappa, zero_start)
            if config.eta_post > 0:
                _smoothing_norms(counter, f"{name}.post", w, config.eta_post, level, kappa)
            if coarsest:
                continue
            half = w // 2
            counter.norm(f"{name}.residual.bn", w, level, kappa)
            counter.conv(f"{name}.R_hat", "R_hat", conv_count(w, half, 1, groups), level, kappa)
            counter.conv(f"{name}.Pi_hat", "Pi_hat", conv_count(w, half, 1, groups), level, kappa)
            counter.conv(f"{name}.P_hat", "P_hat", conv_count(half, w, 1, groups), level, kappa)
        if level < len(widths):
            _transfer(counter, level, width, widths[level], config.fas)


def count_weights(config: ModelConfig, name: Optional[str] = None) -> WeightBreakdown:
    """Exact parameter count of the model ``build_model(config)`` would create."""
    plan = resolve_plan(config)
    widths = plan.widths
    counter = _Counter(config.batch_norm)

    counter.conv("stem.conv", "stem", conv_count(config.input_channels, widths[0]))
    counter.norm("stem.bn", widths[0])
    if config.variant is Variant.RESNET:
        _resnet(counter, config, widths)
    elif config.variant is Variant.MGNET:
        _mgnet(counter, config, widths, plan.g_s)
    else:
        _mgiad(counter, config, widths, plan.ladders, plan.g_s)
    counter.conv("head.weight", "head", widths[-1] * config.num_classes)
    counter.conv("head.bias", "head", config.num_classes)

    breakdown = WeightBreakdown(
        model=name or config.variant.value,
        c_K=plan.c_K,
        g_s=plan.g_s,
        channel_scale=config.channel_scale,
        operators=counter.operators,
    )
    logger.debug("weights counted", model=breakdown.model, total=breakdown.total)
    return breakdown
