"""
Tests for the explicit matrix form of convolutions.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.errors import ConfigurationError, OracleRefusalError
from app.engine import ConvOperator, Parameter, Tensor, conv2d, conv_as_matrix, flatten, unflatten
from app.verification.suites import block_pattern_violations, matrix_suite


@pytest.mark.parametrize(
    "in_channels,out_channels,groups,stride,stencil",
    [(2, 3, 1, 1, 3), (4, 4, 2, 1, 3), (4, 8, 4, 2, 3), (6, 3, 3, 1, 1), (3, 3, 1, 2, 3)],
)
def test_matrix_reproduces_convolution(rng, in_channels, out_channels, groups, stride, stencil):
    op = ConvOperator.create("c", in_channels, out_channels, stencil, groups, stride, dtype=np.float64, rng=rng)
    x = rng.standard_normal((1, 5, 4, in_channels))
    direct = conv2d(Tensor(x), op).data
    matrix = conv_as_matrix(op, x.shape)
    assert matrix.shape == (direct.size, x.size)
    assert_allclose(unflatten(matrix @ flatten(x), direct.shape[1:]), direct, rtol=0, atol=1e-12)


def test_laplacian_stencil_matrix():
    """The 5-point stencil on a 5x5 grid: interior rows sum to zero, boundary rows lose neighbours."""
    weights = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]]).reshape(1, 1, 3, 3)
    op = ConvOperator(Parameter(weights, "laplace", "A", frozen=True), 1, 1, padding=1)
    matrix = conv_as_matrix(op, (5, 5, 1)).toarray()
    assert matrix.shape == (25, 25)
    assert_allclose(np.diag(matrix), 4.0)
    row_sums = matrix.sum(axis=1).reshape(5, 5)
    assert_allclose(row_sums[1:-1, 1:-1], 0.0)
    assert row_sums[0, 0] == 2.0 and row_sums[0, 2] == 1.0
    assert np.all(np.delete(row_sums.reshape(-1), [6, 7, 8, 11, 12, 13, 16, 17, 18]) > 0)
    assert_allclose(matrix, matrix.T)


def test_grouped_matrix_is_block_diagonal_in_channels(rng):
    """Entries coupling different channel groups are exactly zero."""
    op = ConvOperator.create("c", 8, 8, groups=4, dtype=np.float64, rng=rng)
    assert block_pattern_violations(op, (4, 4, 8)) == 0
    matrix = conv_as_matrix(op, (4, 4, 8)).toarray()
    first_group_rows = matrix[0::8]
    assert np.count_nonzero(first_group_rows[:, np.arange(matrix.shape[1]) % 8 >= 2]) == 0
    assert np.count_nonzero(first_group_rows) > 0


def test_depthwise_matrix_has_one_input_channel_per_row(rng):
    op = ConvOperator.create("c", 4, 4, groups=4, dtype=np.float64, rng=rng)
    matrix = conv_as_matrix(op, (3, 3, 4)).tocoo()
    assert np.all(matrix.row % 4 == matrix.col % 4)


def test_refuses_matrices_above_the_row_limit(rng):
    op = ConvOperator.create("c", 4, 4, dtype=np.float64, rng=rng)
    with pytest.raises(OracleRefusalError, match="limit"):
        conv_as_matrix(op, (8, 8, 4), limit=100)


def test_rejects_mismatched_input_shape(rng):
    op = ConvOperator.create("c", 4, 4, dtype=np.float64, rng=rng)
    with pytest.raises(ConfigurationError):
        conv_as_matrix(op, (3, 3, 2))
    with pytest.raises(ConfigurationError):
        flatten(np.zeros((2, 3, 3, 4)))


def test_matrix_suite_passes():
    results = {r.name: r for r in matrix_suite()}
    assert all(r.passed for r in results.values()), [r.line() for r in results.values()]
    assert results["matrix.cases"].measured >= 50
