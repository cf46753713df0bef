"""
Frozen linear models with hand-set operators.

With identity activations and no batch normalization the smoothing
iteration, the coarsening leg and SiC are linear solvers. The classes here
load fixed stencils into frozen convolutions so these solvers can be run
through the same block code the trainable networks use.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from app.blocks.hierarchy import ChannelHierarchy, ChannelLevel, sic_cycle
from app.blocks.smoothing import ResolutionTransfer, SmoothingBlock, resolution_step, smooth
from app.blocks.units import ConvUnit
from app.core.errors import ConfigurationError
from app.engine.operators import ConvOperator, Padding
from app.engine.tensor import Parameter, ParameterRegistry, Tensor


def frozen_conv(
    shared_id: str,
    weights: np.ndarray,
    groups: int = 1,
    stride: int = 1,
    padding: Optional[Padding] = None,
    role: str = "conv",
    registry: Optional[ParameterRegistry] = None,
) -> ConvOperator:
    """A double-precision convolution whose weights never change."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 4:
        raise ConfigurationError(f"{shared_id}: weights must be (out, in/g, s, s'), got {weights.shape}")
    out_channels, group_in, s, t = weights.shape
    param = Parameter(weights.copy(), shared_id, role, frozen=True)
    if registry is not None:
        registry.register(param)
    return ConvOperator(param, group_in * groups, out_channels, (s, t), groups, stride, padding)


def linear_unit(op: ConvOperator) -> ConvUnit:
    return ConvUnit(op, None, "identity")


def linear_block(a: ConvOperator, b: ConvOperator, steps: int) -> SmoothingBlock:
    return SmoothingBlock([linear_unit(a)] * steps, [linear_unit(b)] * steps)


@dataclass
class LevelStencils:
    """Operators of one resolution level in conv weight layout."""

    A: np.ndarray
    B: np.ndarray
    R: Optional[np.ndarray] = None
    Pi: Optional[np.ndarray] = None
    transfer_padding: Padding = 0


class LinearResolutionModel:
    """Smoothing plus resolution coarsening with frozen stencils (one channel)."""

    def __init__(self, stencils: List[LevelStencils], nu: int = 1, fas: bool = False):
        if not stencils:
            raise ConfigurationError("linear model needs at least one level")
        self.registry = ParameterRegistry()
        self.nu = nu
        self.fas = fas
        self.a_ops: List[ConvOperator] = []
        self.b_ops: List[ConvOperator] = []
        self.smoothers: List[SmoothingBlock] = []
        self.transfers: List[ResolutionTransfer] = []
        for level, ops in enumerate(stencils, start=1):
            a = frozen_conv(f"level{level}.A", ops.A, role="A", registry=self.registry)
            b = frozen_conv(f"level{level}.B", ops.B, role="B", registry=self.registry)
            self.a_ops.append(a)
            self.b_ops.append(b)
            self.smoothers.append(linear_block(a, b, nu))
            if level == len(stencils):
                break
            if ops.R is None or (fas and ops.Pi is None):
                raise ConfigurationError(f"level {level} is missing its transfer stencils")
            R = frozen_conv(
                f"transfer{level}.R", ops.R, stride=2, padding=ops.transfer_padding, role="R",
                registry=self.registry,
            )
            Pi = None
            if fas:
                Pi = frozen_conv(
                    f"transfer{level}.Pi", ops.Pi, stride=2, padding=ops.transfer_padding, role="Pi",
                    registry=self.registry,
                )
            self.transfers.append(ResolutionTransfer(linear_unit(a), R, Pi, fas))

    @property
    def frozen(self) -> bool:
        return all(param.frozen for param in self.registry)

    def smoothing_history(self, u0: np.ndarray, f: np.ndarray, steps: int, level: int = 0) -> List[np.ndarray]:
        """``u`` after each of ``steps`` single smoothing steps on one level."""
        block = linear_block(self.a_ops[level], self.b_ops[level], 1)
        u, rhs = Tensor(u0, dtype=np.float64), Tensor(f, dtype=np.float64)
        history = []
        for _ in range(steps):
            u = smooth(u, rhs, block, mode="eval")
            history.append(u.data.copy())
        return history

    def coarsening_leg(self, f: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        """``(u_l, f_l)`` on every level: ``f_l`` on arrival, ``u_l`` after smoothing."""
        rhs = Tensor(f, dtype=np.float64)
        u = Tensor(np.zeros_like(rhs.data))
        au = None
        leg = []
        for level, block in enumerate(self.smoothers):
            f_level = rhs.data.copy()
            u = smooth(u, rhs, block, mode="eval", au=au)
            leg.append((u.data.copy(), f_level))
            if level < len(self.transfers):
                next_unit = self.smoothers[level + 1].a_units[0]
                u, rhs, au = resolution_step(u, rhs, self.transfers[level], next_unit, mode="eval")
        return leg


@dataclass
class ChannelStencils:
    """1x1 channel operators of one in-channel level, shaped (out, in/g, 1, 1)."""

    A_hat: np.ndarray
    B_hat: np.ndarray
    R_hat: Optional[np.ndarray] = None
    Pi_hat: Optional[np.ndarray] = None
    P_hat: Optional[np.ndarray] = None
    groups: int = 1


def linear_channel_hierarchy(
    stencils: List[ChannelStencils],
    eta_pre: int = 1,
    eta_post: int = 1,
    registry: Optional[ParameterRegistry] = None,
) -> ChannelHierarchy:
    """A frozen SiC hierarchy from explicit channel operators."""
    registry = registry if registry is not None else ParameterRegistry()
    levels = []
    for kappa, ops in enumerate(stencils, start=1):
        name = f"ch{kappa}"
        coarsest = kappa == len(stencils)
        groups = 1 if coarsest else ops.groups
        a = frozen_conv(f"{name}.A_hat", ops.A_hat, groups=groups, role="A_hat", registry=registry)
        b = frozen_conv(f"{name}.B_hat", ops.B_hat, groups=groups, role="B_hat", registry=registry)
        pre = linear_block(a, b, eta_pre)
        post = linear_block(a, b, eta_post) if eta_post > 0 else None
        if coarsest:
            levels.append(ChannelLevel(a.out_channels, pre, post))
            continue
        R_hat = frozen_conv(f"{name}.R_hat", ops.R_hat, groups=groups, role="R_hat", registry=registry)
        Pi_hat = frozen_conv(f"{name}.Pi_hat", ops.Pi_hat, groups=groups, role="Pi_hat", registry=registry)
        P_hat = frozen_conv(f"{name}.P_hat", ops.P_hat, groups=groups, role="P_hat", registry=registry)
        levels.append(ChannelLevel(a.out_channels, pre, post, linear_unit(a), R_hat, Pi_hat, P_hat))
    widths = [level.width for level in levels]
    g_s = widths[0] // stencils[0].groups
    return ChannelHierarchy(levels, g_s, widths[-1], eta_pre, eta_post)


def run_linear_cycle(hierarchy: ChannelHierarchy, u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """One SiC cycle in double precision, eval mode."""
    out = sic_cycle(Tensor(f, dtype=np.float64), Tensor(u, dtype=np.float64), hierarchy, mode="eval")
    return out.data
