"""
Block execution versus the linear multigrid oracle.

The mg-blocks code is run in linear mode (identity activations, no batch
normalization) with frozen operators carrying the oracle's stencils; every
intermediate it produces must match the matrix computation of the oracle.
Mismatches are collected into a structured report instead of raising.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field

from app.blocks.hierarchy import ChannelHierarchy
from app.blocks.linear import (
    ChannelStencils,
    LevelStencils,
    LinearResolutionModel,
    linear_channel_hierarchy,
    run_linear_cycle,
)
from app.blocks.smoothing import ResolutionTransfer, resolution_step
from app.blocks.units import LayerFactory
from app.core.errors import ConfigurationError, UsageError
from app.core.seeding import substream
from app.engine.matrix import conv_as_matrix
from app.engine.tensor import ParameterRegistry, Tensor
from app.oracle.multigrid import GridHierarchy, coarsening_leg, jacobi_smooth, vcycle
from app.oracle.poisson import PoissonProblem

logger = structlog.get_logger("mgiad.oracle.correspondence")

TOLERANCE = 1e-12
FULL_WEIGHTING = np.array([0.25, 0.5, 0.25])


class Mismatch(BaseModel):
    """First differing entry of a failed comparison."""

    check: str
    step: int
    index: int
    blocks_value: float
    oracle_value: float


class CheckRow(BaseModel):
    """One compared quantity."""

    check: str
    step: int
    max_abs_diff: float
    tolerance: float
    passed: bool


class CorrespondenceReport(BaseModel):
    """All comparisons of one correspondence run."""

    rows: List[CheckRow] = Field(default_factory=list)
    mismatches: List[Mismatch] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def max_abs_diff(self) -> float:
        return max((row.max_abs_diff for row in self.rows), default=0.0)

    def compare(self, check: str, step: int, blocks: np.ndarray, oracle: np.ndarray, tolerance: float) -> None:
        blocks = np.asarray(blocks, dtype=np.float64).reshape(-1)
        oracle = np.asarray(oracle, dtype=np.float64).reshape(-1)
        if blocks.shape != oracle.shape:
            raise ConfigurationError(f"{check}: {blocks.size} block values vs {oracle.size} oracle values")
        diff = np.abs(blocks - oracle)
        worst = float(diff.max()) if diff.size else 0.0
        passed = worst <= tolerance
        self.rows.append(CheckRow(check=check, step=step, max_abs_diff=worst, tolerance=tolerance, passed=passed))
        if not passed:
            index = int(np.argmax(diff))
            self.mismatches.append(
                Mismatch(
                    check=check,
                    step=step,
                    index=index,
                    blocks_value=float(blocks[index]),
                    oracle_value=float(oracle[index]),
                )
            )

    def merge(self, other: "CorrespondenceReport") -> "CorrespondenceReport":
        self.rows.extend(other.rows)
        self.mismatches.extend(other.mismatches)
        return self

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=list(CheckRow.model_fields))


def _restriction_weights(dimension: int) -> np.ndarray:
    if dimension == 1:
        return FULL_WEIGHTING.reshape(1, 1, 1, 3)
    return np.outer(FULL_WEIGHTING, FULL_WEIGHTING).reshape(1, 1, 3, 3)


def level_stencils(hierarchy: GridHierarchy, omega: float) -> List[LevelStencils]:
    """Conv weights reproducing every grid level's operator, Jacobi smoother and transfer."""
    if hierarchy.transfer != "full_weighting":
        raise ConfigurationError("resolution stencils exist for full-weighting hierarchies only")
    stencils = []
    for index, grid in enumerate(hierarchy.levels):
        stencil = grid.stencil
        A = stencil.reshape(1, 1, 1, 3) if grid.dimension == 1 else stencil.reshape(1, 1, 3, 3)
        B = np.full((1, 1, 1, 1), omega / stencil.reshape(-1)[stencil.size // 2])
        transfer = None
        if index < hierarchy.depth - 1:
            transfer = _restriction_weights(grid.dimension)
        stencils.append(LevelStencils(A=A, B=B, R=transfer, Pi=transfer, transfer_padding=0))
    return stencils


def build_linear_model(
    hierarchy: GridHierarchy, omega: float, nu: int = 1, fas: bool = False
) -> LinearResolutionModel:
    """Frozen mg-blocks model carrying the oracle's operators."""
    return LinearResolutionModel(level_stencils(hierarchy, omega), nu=nu, fas=fas)


def correspondence_check(
    model: LinearResolutionModel,
    problem: PoissonProblem,
    hierarchy: GridHierarchy,
    omega: float,
    steps: int = 5,
    tolerance: float = TOLERANCE,
) -> CorrespondenceReport:
    """Compare smoothing, the coarsening leg and the FAS collapse against the oracle."""
    if not model.frozen:
        raise UsageError("correspondence_check needs a model whose weights are all frozen")
    if len(model.smoothers) != hierarchy.depth:
        raise ConfigurationError(
            f"model has {len(model.smoothers)} levels, oracle hierarchy has {hierarchy.depth}"
        )
    report = CorrespondenceReport()
    dimension, size = problem.dimension, problem.size
    f = problem.rhs

    # Smoothing: u after every single step.
    rhs = problem.as_map(f)
    history = model.smoothing_history(np.zeros_like(rhs), rhs, steps)
    u = np.zeros(problem.unknowns)
    for step, blocks_u in enumerate(history, start=1):
        u = jacobi_smooth(u, f, hierarchy.levels[0], omega, 1)
        report.compare("smoothing", step, blocks_u, u, tolerance)

    # Coarsening leg: f_l on arrival and u_l after smoothing on every level.
    blocks_leg = model.coarsening_leg(rhs)
    oracle_leg = coarsening_leg(hierarchy, f, omega, model.nu, fas=model.fas)
    check = "fas_leg" if model.fas else "coarsening_leg"
    for level, ((bu, bf), (ou, of)) in enumerate(zip(blocks_leg, oracle_leg), start=1):
        report.compare(f"{check}.f", level, bf, of, tolerance)
        report.compare(f"{check}.u", level, bu, ou, tolerance)

    if model.transfers and model.transfers[0].Pi is not None:
        report.merge(fas_collapse_check(model, rhs, tolerance))

    logger.info(
        "correspondence checked",
        dimension=dimension,
        size=size,
        levels=hierarchy.depth,
        passed=report.passed,
        max_abs_diff=report.max_abs_diff,
    )
    return report


def fas_collapse_check(
    model: LinearResolutionModel, f: np.ndarray, tolerance: float = TOLERANCE
) -> CorrespondenceReport:
    """With ``u = 0`` the FAS and plain resolution steps give the same coarse data."""
    report = CorrespondenceReport()
    transfer = model.transfers[0]
    plain = ResolutionTransfer(transfer.residual, transfer.R, None, fas=False)
    fas = ResolutionTransfer(transfer.residual, transfer.R, transfer.Pi, fas=True)
    rhs = Tensor(f, dtype=np.float64)
    zero = Tensor(np.zeros_like(rhs.data))
    next_unit = model.smoothers[1].a_units[0]
    f_plain = resolution_step(zero, rhs, plain, next_unit, mode="eval").f
    f_fas = resolution_step(zero, rhs, fas, next_unit, mode="eval").f
    report.compare("fas_collapse", 1, f_fas.data, f_plain.data, tolerance)
    return report


def _as_conv(matrix) -> np.ndarray:
    return np.asarray(matrix, dtype=np.float64)[:, :, None, None]


def channel_two_grid(
    channels: int, omega: float, eta_pre: int = 1, eta_post: int = 1
) -> Tuple[ChannelHierarchy, GridHierarchy]:
    """SiC hierarchy on a 1x1 image whose channels carry a 1-D Poisson grid.

    Pairwise aggregation restricts the channels; the projection is zero and
    the coarsest smoother is the exact inverse, so one SiC cycle is exactly
    the textbook two-grid cycle with Jacobi smoothing.
    """
    grid = GridHierarchy.build(PoissonProblem(1, channels), 2, transfer="aggregation", max_coarse=None)
    fine, coarse = grid.levels
    A = fine.matrix.toarray()
    Ac = coarse.matrix.toarray()
    half = channels // 2
    stencils = [
        ChannelStencils(
            A_hat=_as_conv(A),
            B_hat=_as_conv(np.diag(omega / fine.diagonal)),
            R_hat=_as_conv(fine.R.toarray()),
            Pi_hat=np.zeros((half, channels, 1, 1)),
            P_hat=_as_conv(fine.P.toarray()),
            groups=1,
        ),
        ChannelStencils(A_hat=_as_conv(Ac), B_hat=_as_conv(np.linalg.inv(Ac))),
    ]
    return linear_channel_hierarchy(stencils, eta_pre, eta_post), grid


def channel_cycle_check(
    channels: int = 8,
    omega: float = 2.0 / 3.0,
    eta_pre: int = 1,
    eta_post: int = 1,
    cycles: int = 3,
    seed: int = 0,
    tolerance: float = TOLERANCE,
) -> CorrespondenceReport:
    """Repeated SiC cycles against the oracle's two-grid V-cycle."""
    hierarchy, grid = channel_two_grid(channels, omega, eta_pre, eta_post)
    rng = substream(seed, "data", channels)
    f = rng.standard_normal(channels)
    u_blocks = rng.standard_normal(channels)
    u_oracle = u_blocks.copy()
    report = CorrespondenceReport()
    for cycle in range(1, cycles + 1):
        u_blocks = run_linear_cycle(
            hierarchy, u_blocks.reshape(1, 1, 1, channels), f.reshape(1, 1, 1, channels)
        ).reshape(-1)
        u_oracle = vcycle(u_oracle, f, grid, omega, eta_pre, eta_post)
        report.compare("sic_two_grid", cycle, u_blocks, u_oracle, tolerance)
    return report


def assemble_sic_matrices(
    hierarchy: ChannelHierarchy, spatial: Sequence[int]
) -> Tuple[np.ndarray, np.ndarray]:
    """Dense ``(M_u, M_f)`` with ``sic_cycle(f, u) = M_u u + M_f f`` for a linear hierarchy.

    Every operator is materialized with ``conv_as_matrix`` and the cycle is
    replayed on affine maps of the stacked input ``[u; f]``.
    """
    m, n = spatial
    for level in hierarchy.levels:
        for unit in level.pre.a_units + level.pre.b_units:
            if unit.bn is not None or unit.activation != "identity":
                raise UsageError("cycle assembly needs identity activations and no batch norm")

    def mat(op, width):
        return conv_as_matrix(op, (m, n, width)).toarray()

    size = m * n * hierarchy.levels[0].width
    U = np.hstack([np.eye(size), np.zeros((size, size))])
    F = np.hstack([np.zeros((size, size)), np.eye(size)])

    def smooth_affine(U, F, level, steps):
        A = mat(level.A_hat, level.width)
        B = mat(level.B_hat, level.width)
        for _ in range(steps):
            U = U + B @ (F - A @ U)
        return U

    def cycle(kappa, U, F):
        level = hierarchy.levels[kappa]
        U = smooth_affine(U, F, level, hierarchy.eta_pre)
        if not level.is_coarsest:
            coarse = hierarchy.levels[kappa + 1]
            half = coarse.width
            A = mat(level.A_hat, level.width)
            Uc = mat(level.Pi_hat, level.width) @ U
            Fc = mat(level.R_hat, level.width) @ (F - A @ U) + mat(coarse.A_hat, half) @ Uc
            U = U + mat(level.P_hat, half) @ cycle(kappa + 1, Uc, Fc)
        if hierarchy.eta_post > 0:
            U = smooth_affine(U, F, level, hierarchy.eta_post)
        return U

    result = cycle(0, U, F)
    return result[:, :size], result[:, size:]


def random_linear_hierarchy(
    width: int, g_s: int, c_K: int, eta_pre: int = 1, eta_post: int = 1, seed: int = 0
) -> ChannelHierarchy:
    """A random, double-precision, linear-mode SiC hierarchy."""
    factory = LayerFactory(
        ParameterRegistry(), substream(seed, "init"), dtype=np.float64, activation="identity", batch_norm=False
    )
    return ChannelHierarchy.create(factory, "sic", width, g_s, c_K, eta_pre, eta_post)


def sic_matrix_check(
    width: int = 8,
    g_s: int = 4,
    c_K: int = 4,
    spatial: Sequence[int] = (3, 3),
    seed: int = 0,
    tolerance: float = 1e-12,
    hierarchy: Optional[ChannelHierarchy] = None,
) -> CorrespondenceReport:
    """Tensor execution of a linear SiC cycle versus its assembled matrix."""
    hierarchy = hierarchy or random_linear_hierarchy(width, g_s, c_K, seed=seed)
    m, n = spatial
    w = hierarchy.levels[0].width
    M_u, M_f = assemble_sic_matrices(hierarchy, (m, n))
    rng = substream(seed, "data", m, n, w)
    u = rng.standard_normal((1, m, n, w))
    f = rng.standard_normal((1, m, n, w))
    out = run_linear_cycle(hierarchy, u, f).reshape(-1)
    expected = M_u @ u.reshape(-1) + M_f @ f.reshape(-1)
    scale = max(1.0, float(np.abs(expected).max()))
    report = CorrespondenceReport()
    report.compare("sic_matrix", 1, out / scale, expected / scale, tolerance)
    return report
