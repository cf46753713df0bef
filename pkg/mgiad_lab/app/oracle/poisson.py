"""
Model Poisson problems and their grid transfers.

Unknowns live on the interior points of a uniform grid with zero Dirichlet
boundary. The system matrix is the unscaled stencil ``[-1, 2, -1]`` in 1-D
and the five-point stencil in 2-D. 2-D vectors are flattened row by row,
which matches the ``(1, n, n, 1)`` feature-map layout of the engine.
"""

from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from app.core.errors import ConfigurationError, MGiaDError
from app.core.seeding import substream

SOLVE_TOLERANCE = 1e-10


def tridiagonal(size: int, lower: float, diagonal: float, upper: float) -> sparse.csr_matrix:
    return sparse.diags(
        [np.full(size - 1, lower), np.full(size, diagonal), np.full(size - 1, upper)],
        offsets=[-1, 0, 1],
        shape=(size, size),
        format="csr",
    )


def poisson_matrix(dimension: int, size: int) -> sparse.csr_matrix:
    """System matrix on ``size`` interior points per axis."""
    _check_dimension(dimension)
    if size < 1:
        raise ConfigurationError(f"grid needs at least one interior point, got {size}")
    t = tridiagonal(size, -1.0, 2.0, -1.0)
    if dimension == 1:
        return t
    eye = sparse.identity(size, format="csr")
    return (sparse.kron(t, eye) + sparse.kron(eye, t)).tocsr()


def full_weighting(size: int, dimension: int = 1) -> sparse.csr_matrix:
    """Restriction ``[1/4, 1/2, 1/4]`` from ``size = 2k + 1`` to ``k`` points per axis."""
    _check_dimension(dimension)
    if size < 3 or size % 2 == 0:
        raise ConfigurationError(f"full weighting needs an odd grid of at least 3 points, got {size}")
    coarse = (size - 1) // 2
    rows = np.repeat(np.arange(coarse), 3)
    cols = (2 * np.arange(coarse)[:, None] + np.arange(3)).reshape(-1)
    values = np.tile([0.25, 0.5, 0.25], coarse)
    r = sparse.csr_matrix((values, (rows, cols)), shape=(coarse, size))
    return r if dimension == 1 else sparse.kron(r, r).tocsr()


def aggregation(size: int) -> sparse.csr_matrix:
    """Pairwise averaging from an even ``size`` to ``size / 2`` points (1-D)."""
    if size < 2 or size % 2:
        raise ConfigurationError(f"aggregation needs an even number of points, got {size}")
    coarse = size // 2
    rows = np.repeat(np.arange(coarse), 2)
    cols = np.arange(size)
    return sparse.csr_matrix((np.full(size, 0.5), (rows, cols)), shape=(coarse, size))


def interpolation(restriction: sparse.csr_matrix, dimension: int = 1) -> sparse.csr_matrix:
    """Prolongation paired with a restriction: ``P = 2^d R^T``."""
    return (restriction.T * float(2 ** dimension)).tocsr()


def stencil_of(matrix: sparse.spmatrix, size: int, dimension: int) -> np.ndarray:
    """3-point (1-D) or 3x3 (2-D) stencil read from the row of the central unknown."""
    center = size // 2
    row = matrix.getrow(center if dimension == 1 else center * size + center).toarray().ravel()
    if dimension == 1:
        stencil = np.zeros(3)
        for d in (-1, 0, 1):
            if 0 <= center + d < size:
                stencil[d + 1] = row[center + d]
        return stencil
    stencil = np.zeros((3, 3))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            y, x = center + dy, center + dx
            if 0 <= y < size and 0 <= x < size:
                stencil[dy + 1, dx + 1] = row[y * size + x]
    return stencil


def _check_dimension(dimension: int) -> None:
    if dimension not in (1, 2):
        raise ConfigurationError(f"Poisson problems are 1-D or 2-D, got dimension {dimension}")


class PoissonProblem:
    """Symmetric positive definite model problem ``A u = f``."""

    def __init__(self, dimension: int, size: int, rhs: Optional[np.ndarray] = None, seed: int = 0):
        _check_dimension(dimension)
        self.dimension = dimension
        self.size = size
        self.matrix = poisson_matrix(dimension, size)
        if rhs is None:
            rhs = substream(seed, "data", dimension, size).standard_normal(self.unknowns)
        rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
        if rhs.size != self.unknowns:
            raise ConfigurationError(f"rhs has {rhs.size} entries, grid has {self.unknowns}")
        self.rhs = rhs

    @property
    def unknowns(self) -> int:
        return self.size ** self.dimension

    @property
    def grid_shape(self) -> Tuple[int, ...]:
        return (self.size,) * self.dimension

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    @property
    def stencil(self) -> np.ndarray:
        return stencil_of(self.matrix, self.size, self.dimension)

    @cached_property
    def exact_solution(self) -> np.ndarray:
        """Direct solve; raises if its residual is not below ``SOLVE_TOLERANCE``."""
        solution = sparse_linalg.spsolve(self.matrix.tocsc(), self.rhs)
        relative = np.linalg.norm(self.residual(solution)) / max(np.linalg.norm(self.rhs), 1.0)
        if relative >= SOLVE_TOLERANCE:
            raise MGiaDError(f"direct solve residual {relative:.3e} above {SOLVE_TOLERANCE}")
        return solution

    def residual(self, u: np.ndarray) -> np.ndarray:
        return self.rhs - self.matrix @ u

    def as_map(self, vector: np.ndarray) -> np.ndarray:
        """Vector as a ``(1, m, n, 1)`` feature map (``m = 1`` in 1-D)."""
        vector = np.asarray(vector, dtype=np.float64)
        if self.dimension == 1:
            return vector.reshape(1, 1, self.size, 1)
        return vector.reshape(1, self.size, self.size, 1)
