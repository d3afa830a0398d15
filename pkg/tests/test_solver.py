import numpy as np
import pytest
from numpy.testing import assert_allclose

from hitchin_bvp.mods.solver import (SolveProblem, boundary_problem, dot, evaluate, flat_base, objective_and_gradient,
                                     solve, torelli_problem, volume_first_variation)
from hitchin_bvp.utils.errors import ConfigError
from hitchin_bvp.utils.fields import FormField, GridBallT3, GridT6, d_field, smooth_random_field

SMALL_T6 = (4, 4, 1, 4, 1, 1)


@pytest.fixture
def problem():
    return torelli_problem(SMALL_T6, eps=0.05, seed=0)


def test_zero_perturbation_returns_the_flat_form():
    grid = GridT6(SMALL_T6)
    base = flat_base(grid)
    result = solve(SolveProblem(base, FormField.zeros(grid, 3)))
    assert result.converged
    assert result.iterations == 0
    assert result.residual_history == [0.0]
    assert np.array_equal(result.final_psi.comps, base.comps)


def test_offset_is_exact_and_scaled(problem):
    closed_base, closed_offset = problem.closedness()
    assert closed_base == 0.0
    assert closed_offset < 1e-13
    assert_allclose(problem.offset.norm(), 0.05 * problem.base.norm(), rtol=1e-12)


def test_gradient_matches_central_differences(problem, rng):
    grid = problem.grid
    alpha = smooth_random_field(grid, 2, rng, amplitude=1e-3)
    delta = FormField(grid, 2, rng.standard_normal(grid.shape + (15,)))
    _, g = objective_and_gradient(problem, alpha)
    expected = dot(g, delta)
    errors = []
    for h in (2e-4, 1e-4):
        fp, _ = objective_and_gradient(problem, alpha + delta * h)
        fm, _ = objective_and_gradient(problem, alpha - delta * h)
        errors.append(abs((fp - fm) / (2 * h) - expected))
    assert errors[1] <= 1e-5 * abs(expected)
    assert 3.0 <= errors[0] / errors[1] <= 5.0


def test_volume_first_variation_integrates_by_parts(problem, rng):
    grid = problem.grid
    direction = smooth_random_field(grid, 2, rng)
    lhs, rhs = volume_first_variation(problem, FormField.zeros(grid, 2), direction)
    assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_short_solve_keeps_periods_and_decreases(problem):
    problem.max_iter = 5
    problem.rtol = 1e-12
    result = solve(problem)
    assert result.iterations == 5
    assert result.period_drift < 1e-12
    assert result.closedness < 1e-12
    assert all(b <= a for a, b in zip(result.objective_history, result.objective_history[1:]))
    assert result.residual_history[-1] < result.residual_history[0]
    assert len(result.rows()) == 6


def test_boundary_entries_of_alpha_stay_zero():
    problem = boundary_problem(8, 1, eps=0.02, seed=0, max_iter=3, rtol=1e-12)
    result = solve(problem)
    frozen = ~problem.free
    assert frozen.any()
    assert result.boundary_alpha_max == 0.0
    assert np.all(result.alpha.comps[frozen] == 0.0)


def test_gradient_is_zero_on_frozen_cells():
    problem = boundary_problem(8, 1, eps=0.02, seed=1)
    ev = evaluate(problem, FormField.zeros(problem.grid, 2))
    assert np.all(ev.gradient.comps[~problem.free] == 0.0)


def test_problem_grids_must_agree():
    a = flat_base(GridT6(SMALL_T6))
    b = FormField.zeros(GridBallT3(8, 1), 3)
    with pytest.raises(ConfigError):
        SolveProblem(a, b)


def test_iterates_stay_closed(problem, rng):
    alpha = smooth_random_field(problem.grid, 2, rng)
    assert d_field(problem.psi(alpha)).max_abs() < 1e-12 * problem.base.max_abs() * 16


@pytest.mark.slow
def test_torelli_solve_reaches_the_target():
    problem = torelli_problem(8, eps=0.05, seed=0)
    result = solve(problem)
    assert result.converged
    assert result.reduction >= 1e3
    assert result.period_drift < 1e-12
    assert_allclose(result.volume_history[-1], result.volume_history[0], rtol=1e-6)


@pytest.mark.slow
def test_boundary_solve_reduces_the_residual():
    problem = boundary_problem(16, 8, eps=0.02, seed=0)
    result = solve(problem)
    assert result.reduction >= 1e2
    assert result.boundary_alpha_max == 0.0
    assert all(b <= a for a, b in zip(result.objective_history, result.objective_history[1:]))
