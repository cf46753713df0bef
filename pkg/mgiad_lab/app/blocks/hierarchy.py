"""
In-channel multigrid: the channel ladder and the SiC V-cycle.

On one resolution level the width halves from ``c_1`` down to the coarsest
width ``c_K``. Every finer channel level smooths with grouped operators of
group size ``g_s``; the coarsest level is fully coupled again. Channel
transfers are grouped 1x1 convolutions mapping ``g_s -> g_s/2`` channels
per group (restriction, projection) and back (prolongation).
"""

from typing import List, Optional

import structlog

from app.blocks.smoothing import SmoothingBlock, smooth
from app.blocks.units import ConvUnit, LayerFactory
from app.core.errors import ConfigurationError
from app.engine.operators import ConvOperator
from app.engine.ops import add, conv2d, sub
from app.engine.tensor import Tensor
from app.models.schemas import LadderMode

logger = structlog.get_logger("mgiad.blocks.hierarchy")


def channel_ladder(width: int, c_K: int, mode: LadderMode = LadderMode.EXACT) -> List[int]:
    """Widths ``c_1 > c_2 > ... > c_K``, halving at each step."""
    if c_K < 1:
        raise ConfigurationError(f"coarsest width c_K must be positive, got {c_K}")
    if width < c_K:
        raise ConfigurationError(f"level width {width} is below the coarsest width c_K={c_K}")
    if LadderMode(mode) is LadderMode.EXACT:
        ratio, rest = divmod(width, c_K)
        if rest or ratio & (ratio - 1):
            raise ConfigurationError(
                f"width {width} over c_K={c_K} is not a power of two; use ladder 'floor' "
                f"to stop at the last width >= c_K"
            )
    ladder = [width]
    while ladder[-1] % 2 == 0 and ladder[-1] // 2 >= c_K:
        ladder.append(ladder[-1] // 2)
    return ladder


def check_group_size(ladder: List[int], g_s: int, scope: str = "hierarchy") -> None:
    """Grouped levels (all but the coarsest) must split into groups of ``g_s``."""
    if len(ladder) == 1:
        return
    if g_s < 2 or g_s % 2:
        raise ConfigurationError(f"{scope}: group size g_s={g_s} must be even to halve each group")
    for width in ladder[:-1]:
        if width % g_s:
            raise ConfigurationError(f"{scope}: ladder width {width} is not divisible by g_s={g_s}")


class ChannelLevel:
    """Operators of one in-channel level kappa."""

    def __init__(
        self,
        width: int,
        pre: SmoothingBlock,
        post: Optional[SmoothingBlock],
        residual: Optional[ConvUnit] = None,
        R_hat: Optional[ConvOperator] = None,
        Pi_hat: Optional[ConvOperator] = None,
        P_hat: Optional[ConvOperator] = None,
    ):
        self.width = width
        self.pre = pre
        self.post = post
        self.residual = residual
        self.R_hat = R_hat
        self.Pi_hat = Pi_hat
        self.P_hat = P_hat

    @property
    def A_hat(self) -> ConvOperator:
        return self.pre.A

    @property
    def B_hat(self) -> ConvOperator:
        return self.pre.B[0]

    @property
    def is_coarsest(self) -> bool:
        return self.R_hat is None


class ChannelHierarchy:
    """The channel ladder of one resolution level with its SiC operators."""

    def __init__(self, levels: List[ChannelLevel], g_s: int, c_K: int, eta_pre: int, eta_post: int):
        self.levels = levels
        self.g_s = g_s
        self.c_K = c_K
        self.eta_pre = eta_pre
        self.eta_post = eta_post

    @classmethod
    def create(
        cls,
        factory: LayerFactory,
        scope: str,
        width: int,
        g_s: int,
        c_K: int,
        eta_pre: int = 1,
        eta_post: int = 1,
        ladder_mode: LadderMode = LadderMode.EXACT,
        zero_start: bool = False,
    ) -> "ChannelHierarchy":
        """Operators for every channel level; ``zero_start`` when the cycle always begins at ``u = 0``."""
        if eta_pre < 1 or eta_post < 0:
            raise ConfigurationError(f"{scope}: need eta_pre >= 1 and eta_post >= 0")
        ladder = channel_ladder(width, c_K, ladder_mode)
        check_group_size(ladder, g_s, scope)

        levels = []
        depth = len(ladder)
        for kappa, w in enumerate(ladder, start=1):
            name = f"{scope}.ch{kappa}"
            coarsest = kappa == depth
            groups = 1 if coarsest else w // g_s
            A_hat = factory.conv(f"{name}.A_hat", w, w, groups=groups, role="A_hat")
            B_hat = factory.conv(f"{name}.B_hat", w, w, groups=groups, role="B_hat")
            pre = SmoothingBlock.create(
                factory, f"{name}.pre", w, eta_pre, a_op=A_hat, b_op=B_hat, zero_start=zero_start and kappa == 1
            )
            post = None
            if eta_post > 0:
                post = SmoothingBlock.create(factory, f"{name}.post", w, eta_post, a_op=A_hat, b_op=B_hat)
            if coarsest:
                levels.append(ChannelLevel(w, pre, post))
                continue
            half = w // 2
            residual = factory.unit(A_hat, f"{name}.residual.bn")
            R_hat = factory.conv(f"{name}.R_hat", w, half, stencil=1, groups=groups, role="R_hat")
            Pi_hat = factory.conv(f"{name}.Pi_hat", w, half, stencil=1, groups=groups, role="Pi_hat")
            P_hat = factory.conv(f"{name}.P_hat", half, w, stencil=1, groups=groups, role="P_hat")
            levels.append(ChannelLevel(w, pre, post, residual, R_hat, Pi_hat, P_hat))

        logger.debug("channel hierarchy built", scope=scope, ladder=ladder, g_s=g_s)
        return cls(levels, g_s, c_K, eta_pre, eta_post)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def widths(self) -> List[int]:
        return [level.width for level in self.levels]

    @property
    def first_unit(self) -> Optional[ConvUnit]:
        return self.levels[0].pre.first_unit


def sic_cycle(
    f: Tensor,
    u: Tensor,
    hierarchy: ChannelHierarchy,
    kappa: int = 0,
    mode: str = "train",
    au: Optional[Tensor] = None,
) -> Tensor:
    """One in-channel V-cycle starting at channel level ``kappa`` (0-based)."""
    if not 0 <= kappa < hierarchy.depth:
        raise ConfigurationError(f"channel level {kappa} outside [0, {hierarchy.depth})")
    level = hierarchy.levels[kappa]
    if f.shape[-1] != level.width or u.shape[-1] != level.width:
        raise ConfigurationError(
            f"channel level {kappa + 1} expects {level.width} channels, "
            f"got f={f.shape[-1]} and u={u.shape[-1]}"
        )

    u = smooth(u, f, level.pre, mode, au=au)
    if not level.is_coarsest:
        coarse = hierarchy.levels[kappa + 1]
        u_c = conv2d(u, level.Pi_hat)
        au_c = coarse.pre.a_units[0](u_c, mode)
        f_c = add(conv2d(sub(f, level.residual(u, mode)), level.R_hat), au_c)
        u_hat = sic_cycle(f_c, u_c, hierarchy, kappa + 1, mode, au=au_c)
        u = add(u, conv2d(u_hat, level.P_hat))
    if level.post is not None:
        u = smooth(u, f, level.post, mode)
    return u
