"""
Linear multigrid on Poisson problems.

Grid hierarchies are built by repeated halving with Galerkin coarse
operators ``R A P``. The coarsest level is always solved directly so
contraction measurements only see smoothing and transfer errors.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from app.core.errors import ConfigurationError
from app.core.seeding import substream
from app.oracle.poisson import (
    PoissonProblem,
    aggregation,
    full_weighting,
    interpolation,
    stencil_of,
)

logger = structlog.get_logger("mgiad.oracle.multigrid")

TRANSFERS = ("full_weighting", "aggregation")


@dataclass
class GridLevel:
    """Operators of one grid level; ``R``/``P`` connect it to the next coarser one."""

    size: int
    dimension: int
    matrix: sparse.csr_matrix
    R: Optional[sparse.csr_matrix] = None
    P: Optional[sparse.csr_matrix] = None

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    @property
    def unknowns(self) -> int:
        return self.size ** self.dimension

    @property
    def stencil(self) -> np.ndarray:
        return stencil_of(self.matrix, self.size, self.dimension)


@dataclass
class GridHierarchy:
    """Fine-to-coarse list of grid levels."""

    levels: List[GridLevel]
    transfer: str = "full_weighting"

    @classmethod
    def build(
        cls,
        problem: PoissonProblem,
        levels: int,
        transfer: str = "full_weighting",
        max_coarse: Optional[int] = 3,
    ) -> "GridHierarchy":
        """Halve ``levels - 1`` times; the coarsest grid must have at most ``max_coarse`` points per axis."""
        if levels < 1:
            raise ConfigurationError(f"need at least one grid level, got {levels}")
        if transfer not in TRANSFERS:
            raise ConfigurationError(f"unknown transfer '{transfer}', expected one of {TRANSFERS}")
        if transfer == "aggregation" and problem.dimension != 1:
            raise ConfigurationError("aggregation transfers are defined for 1-D problems only")

        dimension = problem.dimension
        grid = [GridLevel(problem.size, dimension, problem.matrix.tocsr())]
        for _ in range(levels - 1):
            fine = grid[-1]
            if transfer == "full_weighting":
                R = full_weighting(fine.size, dimension)
                coarse_size = (fine.size - 1) // 2
            else:
                R = aggregation(fine.size)
                coarse_size = fine.size // 2
            P = interpolation(R, dimension)
            fine.R, fine.P = R, P
            grid.append(GridLevel(coarse_size, dimension, (R @ fine.matrix @ P).tocsr()))

        coarsest = grid[-1].size
        if levels > 1 and max_coarse is not None and coarsest > max_coarse:
            raise ConfigurationError(
                f"{levels} levels on n={problem.size} leave a coarsest grid of {coarsest} points; "
                f"at most {max_coarse} are solved directly"
            )
        logger.debug("grid hierarchy built", sizes=[lvl.size for lvl in grid], transfer=transfer)
        return cls(grid, transfer)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def sizes(self) -> List[int]:
        return [level.size for level in self.levels]


def jacobi_smooth(u: np.ndarray, f: np.ndarray, system, omega: float, steps: int) -> np.ndarray:
    """``u <- u + omega D^-1 (f - A u)``, ``steps`` times; ``system`` has ``matrix``/``diagonal``."""
    matrix = system.matrix
    inv_diag = omega / system.diagonal
    u = np.array(u, dtype=np.float64)
    for _ in range(steps):
        u = u + inv_diag * (f - matrix @ u)
    return u


def direct_solve(level: GridLevel, f: np.ndarray) -> np.ndarray:
    if level.unknowns == 1:
        return f / level.matrix.toarray()[0, 0]
    return np.linalg.solve(level.matrix.toarray(), f)


def vcycle(
    u: np.ndarray,
    f: np.ndarray,
    hierarchy: GridHierarchy,
    omega: float,
    eta_pre: int = 1,
    eta_post: int = 1,
    level: int = 0,
) -> np.ndarray:
    """One V-cycle from ``level`` down to the directly solved coarsest grid."""
    grid = hierarchy.levels[level]
    if level == hierarchy.depth - 1:
        return direct_solve(grid, f)
    u = jacobi_smooth(u, f, grid, omega, eta_pre)
    r_coarse = grid.R @ (f - grid.matrix @ u)
    e_coarse = vcycle(np.zeros_like(r_coarse), r_coarse, hierarchy, omega, eta_pre, eta_post, level + 1)
    u = u + grid.P @ e_coarse
    return jacobi_smooth(u, f, grid, omega, eta_post)


def smoothing_operator(system, omega: float) -> np.ndarray:
    """Dense ``I - omega D^-1 A``."""
    matrix = system.matrix.toarray()
    return np.eye(matrix.shape[0]) - (omega / system.diagonal)[:, None] * matrix


def two_grid_matrix(hierarchy: GridHierarchy, omega: float, eta_pre: int = 1, eta_post: int = 1) -> np.ndarray:
    """Error propagation ``S^post (I - P A_c^-1 R A) S^pre`` of the two finest levels."""
    if hierarchy.depth < 2:
        raise ConfigurationError("a two-grid cycle needs at least two levels")
    fine, coarse = hierarchy.levels[0], hierarchy.levels[1]
    A = fine.matrix.toarray()
    S = smoothing_operator(fine, omega)
    correction = np.eye(A.shape[0]) - fine.P.toarray() @ np.linalg.solve(
        coarse.matrix.toarray(), fine.R.toarray() @ A
    )
    return np.linalg.matrix_power(S, eta_post) @ correction @ np.linalg.matrix_power(S, eta_pre)


def coarsening_leg(
    hierarchy: GridHierarchy,
    f: np.ndarray,
    omega: float,
    nu: int = 1,
    fas: bool = False,
    projections: Optional[Sequence[sparse.spmatrix]] = None,
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Smooth, then restrict the residual, level by level: ``(u_l, f_l)`` per level.

    Under FAS the next state is ``Pi u`` (``Pi = R`` unless ``projections``
    are given) and the coarse data gains ``A_{l+1} Pi u``.
    """
    u = np.zeros_like(f, dtype=np.float64)
    leg = []
    for index, grid in enumerate(hierarchy.levels):
        f_level = np.array(f, dtype=np.float64)
        u = jacobi_smooth(u, f_level, grid, omega, nu)
        leg.append((u, f_level))
        if index == hierarchy.depth - 1:
            break
        coarse = hierarchy.levels[index + 1]
        f = grid.R @ (f_level - grid.matrix @ u)
        if fas:
            Pi = grid.R if projections is None else projections[index]
            u = Pi @ u
            f = f + coarse.matrix @ u
        else:
            u = np.zeros(coarse.unknowns)
    return leg


def high_frequency_mode(size: int, dimension: int = 1) -> np.ndarray:
    """The most oscillatory Dirichlet eigenvector of the Poisson matrix."""
    points = np.arange(1, size + 1)
    mode = np.sin(size * np.pi * points / (size + 1))
    if dimension == 2:
        mode = np.outer(mode, mode).reshape(-1)
    return mode / np.linalg.norm(mode)


def smoothing_factor(
    system, omega: float, mode: Optional[np.ndarray] = None, sweeps: int = 5
) -> float:
    """Measured per-sweep contraction of ``I - omega D^-1 A`` on ``mode``.

    A handful of power-iteration sweeps started on an eigenvector keep it
    there; many sweeps would drift toward the dominant smooth mode.
    """
    if mode is None:
        size = getattr(system, "size")
        mode = high_frequency_mode(size, getattr(system, "dimension", 1))
    e = np.array(mode, dtype=np.float64)
    zero = np.zeros_like(e)
    ratios = []
    for _ in range(sweeps):
        nxt = jacobi_smooth(e, zero, system, omega, 1)
        ratios.append(np.linalg.norm(nxt) / np.linalg.norm(e))
        e = nxt / np.linalg.norm(nxt)
    return float(np.exp(np.mean(np.log(ratios))))


@dataclass
class ContractionReport:
    """Residual history of repeated cycles and its asymptotic factor."""

    method: str
    residuals: List[float]
    factors: List[float]
    mean_factor: float
    window: Tuple[int, int]
    sizes: List[int] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "cycle": np.arange(len(self.residuals)),
                "residual": self.residuals,
                "factor": [np.nan] + list(self.factors),
            }
        )


def measure_contraction(
    problem: PoissonProblem,
    hierarchy: Optional[GridHierarchy],
    omega: float,
    eta_pre: int = 1,
    eta_post: int = 1,
    cycles: int = 10,
    first: int = 3,
    u0: Optional[np.ndarray] = None,
) -> ContractionReport:
    """Residual reduction per cycle; the factor is the geometric mean over cycles ``first..cycles``.

    Without a hierarchy (or with a single level) each cycle is one Jacobi sweep.
    """
    if not 1 <= first <= cycles:
        raise ConfigurationError(f"measurement window {first}..{cycles} is empty")
    f = problem.rhs
    u = np.zeros(problem.unknowns) if u0 is None else np.array(u0, dtype=np.float64)
    jacobi_only = hierarchy is None or hierarchy.depth == 1
    residuals = [float(np.linalg.norm(problem.residual(u)))]
    for _ in range(cycles):
        if jacobi_only:
            u = jacobi_smooth(u, f, problem, omega, 1)
        else:
            u = vcycle(u, f, hierarchy, omega, eta_pre, eta_post)
        residuals.append(float(np.linalg.norm(problem.residual(u))))

    factors = [nxt / prev if prev > 0 else 0.0 for prev, nxt in zip(residuals, residuals[1:])]
    start, end = residuals[first - 1], residuals[cycles]
    mean = (end / start) ** (1.0 / (cycles - first + 1)) if start > 0 and end > 0 else 0.0
    method = "jacobi" if jacobi_only else f"vcycle({eta_pre},{eta_post})"
    logger.info("contraction measured", method=method, factor=mean, cycles=cycles)
    return ContractionReport(
        method=method,
        residuals=residuals,
        factors=factors,
        mean_factor=float(mean),
        window=(first, cycles),
        sizes=hierarchy.sizes if hierarchy is not None else [problem.size],
    )


def random_guess(problem: PoissonProblem, seed: int = 0) -> np.ndarray:
    return substream(seed, "data", problem.size, 1).standard_normal(problem.unknowns)
