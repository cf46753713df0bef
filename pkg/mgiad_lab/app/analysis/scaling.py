"""
Channel-scaling exponents of convolution parameters.

A scaling fit counts the convolution weights of one block family at several
widths (through ``count_weights`` on a one- or two-level model) and fits
``log(count) = a + p * log(width)`` by least squares. Dense smoothing gives
``p = 2``; SiC and depthwise transfers stay near ``p = 1``.
"""

from enum import Enum
from typing import Callable, Dict, List, Sequence

import numpy as np
import structlog
from pydantic import BaseModel

from app.analysis.complexity import count_weights
from app.core.errors import UsageError
from app.models.schemas import LadderMode, ModelConfig, SharingPolicy, Variant

logger = structlog.get_logger("mgiad.analysis.scaling")

MIN_POINTS = 4
DEFAULT_WIDTHS = (64, 128, 256, 512)


class BlockFamily(str, Enum):
    """Block families a scaling fit can sweep."""

    MGNET = "mgnet"
    SIC = "sic"
    DEPTHWISE = "depthwise"


class ScalingReport(BaseModel):
    """Fitted exponent of one sweep."""

    family: BlockFamily
    widths: List[int]
    counts: List[int]
    exponent: float


def _mgnet_block(width: int, g_s: int, c_K: int) -> ModelConfig:
    return ModelConfig(
        variant=Variant.MGNET, levels=1, channels=[width], nu=2, g_s=None, c_K=None,
        sharing=SharingPolicy(share_A=True, share_B=True),
    )


def _sic_block(width: int, g_s: int, c_K: int) -> ModelConfig:
    return ModelConfig(
        variant=Variant.MGIAD, levels=1, channels=[width], g_s=g_s, c_K=c_K, ladder=LadderMode.FLOOR
    )


def _depthwise_transfer(width: int, g_s: int, c_K: int) -> ModelConfig:
    return ModelConfig(
        variant=Variant.MGNET, levels=2, channels=[width, width], nu=1, g_s=None, c_K=None, fas=False
    )


FAMILY_CONFIGS: Dict[BlockFamily, Callable[[int, int, int], ModelConfig]] = {
    BlockFamily.MGNET: _mgnet_block,
    BlockFamily.SIC: _sic_block,
    BlockFamily.DEPTHWISE: _depthwise_transfer,
}

FAMILY_ROLES = {
    BlockFamily.MGNET: {"A", "B"},
    BlockFamily.SIC: {"A_hat", "B_hat", "R_hat", "Pi_hat", "P_hat"},
    BlockFamily.DEPTHWISE: {"R"},
}


def family_count(family: BlockFamily, width: int, g_s: int = 4, c_K: int = 4) -> int:
    """Convolution weights of one block of ``family`` at ``width`` (no BN, stem or head)."""
    family = BlockFamily(family)
    breakdown = count_weights(FAMILY_CONFIGS[family](width, g_s, c_K))
    roles = FAMILY_ROLES[family]
    return sum(op.count for op in breakdown.operators if op.role in roles and op.level == 1)


def fit_exponent(widths: Sequence[float], counts: Sequence[float]) -> float:
    """Least-squares slope of ``log(count)`` against ``log(width)``."""
    slope, _ = np.polyfit(np.log(np.asarray(widths, dtype=float)), np.log(np.asarray(counts, dtype=float)), 1)
    return float(slope)


def scaling_fit(
    family: BlockFamily, widths: Sequence[int] = DEFAULT_WIDTHS, g_s: int = 4, c_K: int = 4
) -> ScalingReport:
    """Sweep ``widths`` and fit the channel-scaling exponent of ``family``."""
    widths = [int(w) for w in widths]
    if len(widths) < MIN_POINTS:
        raise UsageError(f"a scaling fit needs at least {MIN_POINTS} widths, got {len(widths)}")
    if min(widths) < 1 or any(b <= a for a, b in zip(widths, widths[1:])):
        raise UsageError(f"sweep widths must be positive and increasing, got {widths}")
    ratios = np.array(widths[1:]) / np.array(widths[:-1])
    if not np.allclose(ratios, ratios[0]):
        logger.warning("sweep is not geometrically spaced", widths=widths)

    counts = [family_count(family, w, g_s, c_K) for w in widths]
    exponent = fit_exponent(widths, counts)
    logger.info("scaling fitted", family=BlockFamily(family).value, exponent=exponent)
    return ScalingReport(family=family, widths=widths, counts=counts, exponent=exponent)
