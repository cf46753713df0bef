"""
Explicit matrix form of a convolution.

Feature maps are flattened per sample in C order of ``(m, n, c)``: the
channels of one pixel are contiguous, pixels follow row by row. With this
order a convolution is a block-banded matrix whose blocks are
``out_channels x in_channels`` and, for grouped operators, block diagonal
in the channel groups.
"""

from typing import Optional, Sequence

import numpy as np
import structlog
from scipy import sparse

from app.core.config import get_settings
from app.core.errors import ConfigurationError, OracleRefusalError
from app.engine.operators import ConvOperator

logger = structlog.get_logger("mgiad.engine.matrix")


def conv_as_matrix(
    op: ConvOperator, input_shape: Sequence[int], limit: Optional[int] = None
) -> sparse.csr_matrix:
    """Materialize ``op`` acting on one ``(m, n, c)`` sample as a sparse matrix."""
    if len(input_shape) == 4:
        input_shape = input_shape[1:]
    if len(input_shape) != 3:
        raise ConfigurationError(f"input shape must be (m, n, c), got {tuple(input_shape)}")
    m, n, c = (int(v) for v in input_shape)
    if c != op.in_channels:
        raise ConfigurationError(
            f"{op.shared_id}: input has {c} channels, operator expects {op.in_channels}"
        )
    mo, no = op.output_extent(m, n)
    if mo < 1 or no < 1:
        raise ConfigurationError(f"{op.shared_id}: {m}x{n} input is smaller than the stencil")

    cout = op.out_channels
    n_rows = mo * no * cout
    limit = get_settings().matrix_row_limit if limit is None else limit
    if n_rows > limit:
        raise OracleRefusalError(
            f"conv_as_matrix would produce {n_rows} rows, above the limit of {limit}"
        )

    s, t = op.stencil
    ph, pw = op.padding
    kg = op.group_size
    og = cout // op.groups
    yo, xo, o, k, i, j = np.meshgrid(
        np.arange(mo), np.arange(no), np.arange(cout), np.arange(kg), np.arange(s), np.arange(t),
        indexing="ij",
    )
    yi = yo * op.stride + i - ph
    xi = xo * op.stride + j - pw
    valid = (yi >= 0) & (yi < m) & (xi >= 0) & (xi < n)

    rows = ((yo * no + xo) * cout + o)[valid]
    cols = ((yi * n + xi) * c + (o // og) * kg + k)[valid]
    values = op.weights.data[o, k, i, j][valid]
    matrix = sparse.coo_matrix((values, (rows, cols)), shape=(n_rows, m * n * c)).tocsr()
    logger.debug("conv materialized", op=op.shared_id, rows=n_rows, nnz=int(matrix.nnz))
    return matrix


def flatten(sample: np.ndarray) -> np.ndarray:
    """One ``(m, n, c)`` map (or a batch of one) as a vector in matrix order."""
    sample = np.asarray(sample)
    if sample.ndim == 4:
        if sample.shape[0] != 1:
            raise ConfigurationError(f"flatten takes one sample, got batch {sample.shape[0]}")
        sample = sample[0]
    return sample.reshape(-1)


def unflatten(vector: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Inverse of ``flatten``; returns a batch of one."""
    return np.asarray(vector).reshape((1,) + tuple(shape))
