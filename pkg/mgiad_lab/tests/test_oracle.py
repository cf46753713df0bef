"""
Tests for the linear multigrid oracle and its correspondence with the blocks.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.blocks import build_model
from app.core.errors import ConfigurationError, UsageError
from app.oracle import (
    GridHierarchy,
    PoissonProblem,
    assemble_sic_matrices,
    build_linear_model,
    channel_cycle_check,
    coarsening_leg,
    correspondence_check,
    fas_collapse_check,
    jacobi_smooth,
    measure_contraction,
    poisson_matrix,
    sic_matrix_check,
    smoothing_factor,
    two_grid_matrix,
    vcycle,
)
from app.oracle.correspondence import random_linear_hierarchy

OMEGA = 2.0 / 3.0


@pytest.fixture
def poisson63():
    return PoissonProblem(1, 63, seed=0)


def test_poisson_matrix_is_unscaled_second_difference():
    dense = poisson_matrix(1, 4).toarray()
    assert_allclose(dense, [[2, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 2]])
    assert_allclose(poisson_matrix(2, 3).diagonal(), 4.0)


def test_hierarchy_halves_down_to_three_points(poisson63):
    assert GridHierarchy.build(poisson63, 5).sizes == [63, 31, 15, 7, 3]


def test_hierarchy_rejects_bad_level_counts(poisson63):
    with pytest.raises(ConfigurationError, match="coarsest grid"):
        GridHierarchy.build(poisson63, 3)
    with pytest.raises(ConfigurationError):
        GridHierarchy.build(poisson63, 7)
    with pytest.raises(ConfigurationError):
        GridHierarchy.build(PoissonProblem(2, 7), 2, transfer="aggregation")


def test_galerkin_coarse_operator_keeps_the_stencil(poisson63):
    """Full weighting with P = 2 R^T maps [-1, 2, -1] to [-1/4, 1/2, -1/4]."""
    coarse = GridHierarchy.build(poisson63, 2, max_coarse=None).levels[1]
    assert_allclose(coarse.stencil.reshape(-1), [-0.25, 0.5, -0.25])


def test_smoothing_factor_of_damped_jacobi(poisson63):
    """|1 - omega (1 + cos(pi / 64))| for the most oscillatory mode."""
    expected = abs(1.0 - OMEGA * (1.0 + np.cos(np.pi / 64)))
    assert expected == pytest.approx(0.3325, abs=1e-3)
    assert smoothing_factor(poisson63, OMEGA) == pytest.approx(expected, rel=0.1)


def test_jacobi_keeps_the_exact_solution_fixed(poisson63):
    exact = poisson63.exact_solution
    assert_allclose(jacobi_smooth(exact, poisson63.rhs, poisson63, OMEGA, 5), exact, atol=1e-12)
    start = np.zeros(63)
    assert_allclose(jacobi_smooth(start, poisson63.rhs, poisson63, OMEGA, 0), start)


def test_one_level_vcycle_is_a_direct_solve():
    problem = PoissonProblem(1, 7, seed=4)
    u = vcycle(np.zeros(7), problem.rhs, GridHierarchy.build(problem, 1), OMEGA)
    assert_allclose(u, problem.exact_solution, atol=1e-12)


def test_vcycles_reduce_the_residual(poisson63):
    hierarchy = GridHierarchy.build(poisson63, 5)
    u = np.zeros(63)
    for _ in range(3):
        u = vcycle(u, poisson63.rhs, hierarchy, OMEGA)
    assert np.linalg.norm(poisson63.residual(u)) < 0.1 * np.linalg.norm(poisson63.rhs)


@pytest.mark.parametrize("fas", [False, True])
def test_coarsening_leg_restricts_residuals(poisson63, fas):
    hierarchy = GridHierarchy.build(poisson63, 5)
    leg = coarsening_leg(hierarchy, poisson63.rhs, OMEGA, nu=2, fas=fas)
    assert [u.size for u, _ in leg] == hierarchy.sizes
    fine = hierarchy.levels[0]
    u1, f1 = leg[0]
    assert_allclose(u1, jacobi_smooth(np.zeros(63), poisson63.rhs, fine, OMEGA, 2))
    expected = fine.R @ (f1 - fine.matrix @ u1)
    if fas:
        expected = expected + hierarchy.levels[1].matrix @ (fine.R @ u1)
    assert_allclose(leg[1][1], expected, rtol=1e-13, atol=1e-13)


def test_vcycle_contraction_on_1d_poisson(poisson63):
    report = measure_contraction(poisson63, GridHierarchy.build(poisson63, 5), OMEGA)
    assert report.method == "vcycle(1,1)"
    assert report.mean_factor < 0.2
    assert len(report.residuals) == 11


def test_vcycle_contraction_on_2d_poisson():
    problem = PoissonProblem(2, 15, seed=1)
    report = measure_contraction(problem, GridHierarchy.build(problem, 3), 0.8, eta_pre=2, eta_post=2)
    assert report.mean_factor < 0.3


def test_single_level_is_plain_jacobi(poisson63):
    """Smooth error modes barely decay without a coarse grid."""
    jacobi = measure_contraction(poisson63, GridHierarchy.build(poisson63, 1), OMEGA)
    assert jacobi.method == "jacobi"
    assert jacobi.mean_factor > 0.5


def test_exact_start_stays_at_machine_precision(poisson63):
    hierarchy = GridHierarchy.build(poisson63, 5)
    report = measure_contraction(poisson63, hierarchy, OMEGA, u0=poisson63.exact_solution)
    assert max(report.residuals) < 1e-9


def test_two_grid_error_propagation_contracts(poisson63):
    matrix = two_grid_matrix(GridHierarchy.build(poisson63, 2, max_coarse=None), OMEGA)
    assert np.max(np.abs(np.linalg.eigvals(matrix))) < 0.2


@pytest.mark.parametrize("eta", [1, 2])
def test_two_grid_matrix_propagates_the_vcycle_error(poisson63, eta):
    hierarchy = GridHierarchy.build(poisson63, 2, max_coarse=None)
    rng = np.random.default_rng(7)
    solution = rng.standard_normal(63)
    f = hierarchy.levels[0].matrix @ solution
    e0 = rng.standard_normal(63)
    u1 = vcycle(solution - e0, f, hierarchy, OMEGA, eta_pre=eta, eta_post=eta)
    expected = two_grid_matrix(hierarchy, OMEGA, eta_pre=eta, eta_post=eta) @ e0
    assert_allclose(solution - u1, expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("dimension,size,scale", [(1, 63, 0.5), (2, 15, 0.25)])
def test_restriction_is_scaled_transpose_of_interpolation(dimension, size, scale):
    hierarchy = GridHierarchy.build(PoissonProblem(dimension, size), 2, max_coarse=None)
    fine = hierarchy.levels[0]
    assert_allclose(fine.R.toarray(), scale * fine.P.toarray().T, rtol=0, atol=0)
    assert_allclose(fine.R.toarray().sum(axis=1), 1.0, rtol=1e-15)


def test_aggregation_restriction_is_half_the_transpose():
    hierarchy = GridHierarchy.build(PoissonProblem(1, 8), 2, transfer="aggregation", max_coarse=None)
    fine = hierarchy.levels[0]
    assert_allclose(fine.R.toarray(), 0.5 * fine.P.toarray().T, rtol=0, atol=0)
    assert fine.P.toarray().sum(axis=1).tolist() == [1.0] * 8


@pytest.mark.parametrize("fas", [False, True])
def test_blocks_follow_the_oracle_in_1d(poisson63, fas):
    """Smoothing and the coarsening leg agree elementwise with the matrix solver."""
    hierarchy = GridHierarchy.build(poisson63, 5)
    report = correspondence_check(build_linear_model(hierarchy, OMEGA, nu=2, fas=fas), poisson63, hierarchy, OMEGA)
    assert report.passed, report.mismatches
    assert report.max_abs_diff < 1e-12
    checks = {row.check for row in report.rows}
    assert "smoothing" in checks
    assert ("fas_leg.u" if fas else "coarsening_leg.u") in checks


def test_blocks_follow_the_oracle_in_2d():
    problem = PoissonProblem(2, 15, seed=2)
    hierarchy = GridHierarchy.build(problem, 3)
    report = correspondence_check(build_linear_model(hierarchy, OMEGA, fas=True), problem, hierarchy, OMEGA)
    assert report.passed, report.mismatches


def test_fas_collapses_to_plain_coarsening_at_zero_state(poisson63):
    hierarchy = GridHierarchy.build(poisson63, 5)
    model = build_linear_model(hierarchy, OMEGA, fas=True)
    report = fas_collapse_check(model, poisson63.as_map(poisson63.rhs))
    assert report.passed
    assert report.max_abs_diff == 0.0


def test_correspondence_needs_frozen_weights(poisson63):
    hierarchy = GridHierarchy.build(poisson63, 5)
    model = build_linear_model(hierarchy, OMEGA)
    next(iter(model.registry)).frozen = False
    with pytest.raises(UsageError, match="frozen"):
        correspondence_check(model, poisson63, hierarchy, OMEGA)


def test_correspondence_needs_matching_level_counts(poisson63):
    model = build_linear_model(GridHierarchy.build(poisson63, 5), OMEGA)
    with pytest.raises(ConfigurationError, match="levels"):
        correspondence_check(model, poisson63, GridHierarchy.build(poisson63, 4, max_coarse=None), OMEGA)


def test_channel_cycle_is_the_two_grid_method():
    """Aggregation transfers, zero projection and an exact coarse solve."""
    report = channel_cycle_check(channels=8, cycles=3)
    assert report.passed, report.mismatches
    assert len(report.rows) == 3


@pytest.mark.parametrize("width,g_s,c_K", [(8, 4, 4), (16, 4, 4), (8, 8, 8)])
def test_sic_execution_matches_assembled_matrix(width, g_s, c_K):
    report = sic_matrix_check(hierarchy=random_linear_hierarchy(width, g_s, c_K, seed=3), spatial=(2, 3), seed=3)
    assert report.passed, report.mismatches


def test_sic_assembly_refuses_nonlinear_hierarchies(small_mgiad):
    model = build_model(small_mgiad)
    with pytest.raises(UsageError):
        assemble_sic_matrices(model.hierarchies[0], (2, 2))
