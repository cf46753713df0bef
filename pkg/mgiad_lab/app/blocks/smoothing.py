"""
Residual smoothing iteration and resolution coarsening.

One smoothing step reads ``u <- u + act(bn(B(f - act(bn(A u)))))``. A level
of an MgNet (or one channel level of SiC) runs a fixed number of such steps;
``resolution_step`` then moves the pair ``(u, f)`` to the next, coarser
resolution, optionally in full-approximation form.
"""

from typing import List, NamedTuple, Optional

import numpy as np
import structlog

from app.blocks.units import ConvUnit, LayerFactory
from app.core.errors import ConfigurationError
from app.engine.operators import ConvOperator
from app.engine.ops import add, conv2d, sub, zeros
from app.engine.tensor import Tensor
from app.models.schemas import SharingPolicy

logger = structlog.get_logger("mgiad.blocks.smoothing")


class SmoothingBlock:
    """A fixed number of smoothing steps with their operators and normalizations.

    A zero-start block runs on ``u = 0``: its first step has no A application
    (``A 0 = 0``) and therefore no A normalization, so ``a_units`` holds one
    unit fewer than ``b_units``.
    """

    def __init__(
        self,
        a_units: List[ConvUnit],
        b_units: List[ConvUnit],
        A: Optional[ConvOperator] = None,
        zero_start: bool = False,
    ):
        if not b_units or len(a_units) != len(b_units) - int(zero_start):
            raise ConfigurationError(
                f"smoothing block needs one A unit per step{' after the first' if zero_start else ''}, "
                f"got {len(a_units)} A and {len(b_units)} B units"
            )
        if A is None:
            if not a_units:
                raise ConfigurationError("a zero-start single-step block needs its A operator")
            A = a_units[-1].op
        for a in a_units:
            if (a.op.in_channels, a.op.out_channels) != (A.in_channels, A.out_channels):
                raise ConfigurationError(f"{a.op.shared_id} does not match {A.shared_id}")
        for b in b_units:
            if (b.op.in_channels, b.op.out_channels) != (A.out_channels, A.in_channels):
                raise ConfigurationError(f"{b.op.shared_id} must map {A.out_channels} -> {A.in_channels} channels")
        self.a_units = a_units
        self.b_units = b_units
        self.A = A
        self.zero_start = zero_start

    @classmethod
    def create(
        cls,
        factory: LayerFactory,
        scope: str,
        channels: int,
        steps: int,
        sharing: SharingPolicy = SharingPolicy(),
        groups: int = 1,
        a_op: Optional[ConvOperator] = None,
        b_op: Optional[ConvOperator] = None,
        roles=("A", "B"),
        zero_start: bool = False,
    ) -> "SmoothingBlock":
        """Build ``steps`` smoothing steps on ``channels``-channel maps.

        ``a_op``/``b_op`` force one shared operator for every step, as inside
        SiC where pre- and post-smoothing reuse the same convolutions. With
        ``zero_start`` and unshared A the operator ``A1`` is not created.
        """
        if steps < 1:
            raise ConfigurationError(f"{scope}: smoothing needs at least one step, got {steps}")
        first_a = 2 if zero_start and steps > 1 else 1
        a_ops = _operators(factory, scope, "A", channels, steps, sharing.share_A, groups, a_op, roles[0], first_a)
        b_ops = _operators(factory, scope, "B", channels, steps, sharing.share_B, groups, b_op, roles[1])
        A = a_ops[-1]
        a_ops = a_ops[len(a_ops) - (steps - int(zero_start)):]
        a_units, b_units = [], []
        for i, b in enumerate(b_ops, start=1):
            if i > int(zero_start):
                a_units.append(factory.unit(a_ops[i - 1 - int(zero_start)], f"{scope}.step{i}.bn_A"))
            b_units.append(factory.unit(b, f"{scope}.step{i}.bn_B"))
        return cls(a_units, b_units, A, zero_start)

    @property
    def nu(self) -> int:
        return len(self.b_units)

    @property
    def B(self) -> List[ConvOperator]:
        return [unit.op for unit in self.b_units]

    @property
    def first_unit(self) -> Optional[ConvUnit]:
        """The unit of the first step's ``A(u)``; none for a zero-start block."""
        return None if self.zero_start else self.a_units[0]

    @property
    def data_channels(self) -> int:
        return self.A.out_channels

    @property
    def feature_channels(self) -> int:
        return self.A.in_channels


def _operators(factory, scope, name, channels, steps, shared, groups, given, role, first=1) -> List[ConvOperator]:
    if given is not None:
        return [given] * steps
    if shared:
        return [factory.conv(f"{scope}.{name}", channels, channels, groups=groups, role=role)] * steps
    return [
        factory.conv(f"{scope}.{name}{i}", channels, channels, groups=groups, role=role)
        for i in range(first, steps + 1)
    ]


def _check_pair(u: Tensor, f: Tensor, block: SmoothingBlock) -> None:
    if u.shape[-1] != block.feature_channels or f.shape[-1] != block.data_channels:
        raise ConfigurationError(
            f"smoothing expects u with {block.feature_channels} and f with {block.data_channels} "
            f"channels, got {u.shape[-1]} and {f.shape[-1]}"
        )
    if u.shape[:3] != f.shape[:3]:
        raise ConfigurationError(f"u {u.shape} and f {f.shape} differ spatially")


def smooth(
    u: Tensor, f: Tensor, block: SmoothingBlock, mode: str = "train", au: Optional[Tensor] = None
) -> Tensor:
    """Run every step of ``block``; ``au`` is a precomputed first ``A(u)``."""
    _check_pair(u, f, block)
    skip = int(block.zero_start)
    if skip and (au is not None or np.any(u.data)):
        raise ConfigurationError("a zero-start smoothing block must start from u = 0")
    for i, b_unit in enumerate(block.b_units):
        if i < skip:
            r = f
        elif i == 0 and au is not None:
            r = sub(f, au)
        else:
            r = sub(f, block.a_units[i - skip](u, mode))
        u = add(u, b_unit(r, mode))
    return u

class ResolutionTransfer:
    """Residual restriction R and state projection Pi between resolution levels."""

    def __init__(self, residual: ConvUnit, R: ConvOperator, Pi: Optional[ConvOperator], fas: bool):
        if fas and Pi is None:
            raise ConfigurationError(f"{R.shared_id}: FAS coarsening needs a projection operator")
        if Pi is not None and (Pi.stride, Pi.stencil, Pi.padding) != (R.stride, R.stencil, R.padding):
            raise ConfigurationError(f"{Pi.shared_id} and {R.shared_id} must have the same geometry")
        self.residual = residual
        self.R = R
        self.Pi = Pi
        self.fas = fas

    @classmethod
    def create(
        cls,
        factory: LayerFactory,
        scope: str,
        A: ConvOperator,
        channels: int,
        next_channels: int,
        fas: bool = True,
    ) -> "ResolutionTransfer":
        """Depthwise-style 3x3 stride-2 transfers with a channel multiplier."""
        if next_channels % channels:
            raise ConfigurationError(
                f"{scope}: next level width {next_channels} is not a multiple of {channels}"
            )
        residual = factory.unit(A, f"{scope}.residual.bn")
        R = factory.conv(f"{scope}.R", channels, next_channels, groups=channels, stride=2, role="R")
        Pi = None
        if fas:
            Pi = factory.conv(f"{scope}.Pi", channels, next_channels, groups=channels, stride=2, role="Pi")
        return cls(residual, R, Pi, fas)


class CoarseState(NamedTuple):
    """State handed to the next level; ``au`` caches ``A_{l+1}(u_{l+1})`` under FAS."""

    u: Tensor
    f: Tensor
    au: Optional[Tensor]


def resolution_step(
    u: Tensor, f: Tensor, transfer: ResolutionTransfer, next_unit: Optional[ConvUnit], mode: str = "train"
) -> CoarseState:
    """``f' = R(f - A u) [+ A'(u')]`` with ``u' = 0`` or ``u' = Pi(u)``.

    ``next_unit`` is the first A application of the next level, required under
    FAS only; its output is returned as ``au`` so the next smoothing step
    reuses it.
    """
    if u.shape[:3] != f.shape[:3]:
        raise ConfigurationError(f"u {u.shape} and f {f.shape} differ spatially")
    f_next = conv2d(sub(f, transfer.residual(u, mode)), transfer.R)
    if not transfer.fas:
        u_next = zeros(f_next.shape, dtype=f_next.dtype)
        return CoarseState(u_next, f_next, None)
    if next_unit is None:
        raise ConfigurationError(f"{transfer.R.shared_id}: FAS coarsening needs the next level's first A unit")
    u_next = conv2d(u, transfer.Pi)
    au = next_unit(u_next, mode)
    return CoarseState(u_next, add(f_next, au), au)
