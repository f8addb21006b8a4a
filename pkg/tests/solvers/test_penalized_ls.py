import numpy as np
import pytest
from numpy.testing import assert_allclose

from repgraph.errors import DegenerateProblemError
from repgraph.errors import DimensionError
from repgraph.solvers.penalized_ls import PenalizedLSProblem
from repgraph.solvers.penalized_ls import kkt_residual
from repgraph.solvers.penalized_ls import objective
from repgraph.solvers.penalized_ls import solve
from repgraph.solvers.penalized_ls import solve_rows


def test_identity_design_soft_thresholds():
    problem = PenalizedLSProblem(design=np.eye(2), response=np.array([3.0, -1.0]), scale=1.0, penalty_level=1.0)
    assert problem.c == 0.5
    solution = solve(problem)
    assert solution.converged
    assert_allclose(solution.coef, [1.0, 0.0], atol=1e-12)
    assert solution.coef[1] == 0.0
    assert kkt_residual(problem, np.array([1.0, 0.0])) < 1e-10


def test_unpenalized_identity_design_returns_response():
    y = np.array([0.3, -2.0, 5.0])
    solution = solve(PenalizedLSProblem(design=np.eye(3), response=y))
    assert_allclose(solution.coef, y, atol=1e-12)


def test_single_column_update():
    problem = PenalizedLSProblem(
        design=np.ones((2, 1)), response=np.array([2.0, 2.0]), scale=1.0, penalty_level=0.5
    )
    assert_allclose(solve(problem).coef, [1.5], atol=1e-12)


def test_zero_is_optimal_above_the_threshold():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 5))
    y = rng.normal(size=20)
    level = 1.000001 * float(np.max(np.abs(X.T @ y))) / 20
    problem = PenalizedLSProblem(design=X, response=y, penalty_level=level)
    assert kkt_residual(problem, np.zeros(5)) < 1e-12
    assert np.all(solve(problem).coef == 0.0)


def test_ols_solution_has_zero_kkt_residual():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    problem = PenalizedLSProblem(design=X, response=y)
    assert kkt_residual(problem, ols) < 1e-10
    assert_allclose(solve(problem, tol=1e-13).coef, ols, atol=1e-9)


def test_random_problems_meet_kkt():
    rng = np.random.default_rng(5)
    for _ in range(20):
        N, K = rng.integers(3, 15), rng.integers(1, 12)
        X = rng.normal(size=(N, K))
        y = rng.normal(size=N)
        weights = (rng.random(K) < 0.7).astype(float)
        problem = PenalizedLSProblem(
            design=X, response=y, scale=float(rng.uniform(0.5, 3.0)), penalty_level=0.1, weights=weights
        )
        solution = solve(problem, tol=1e-13)
        assert kkt_residual(problem, solution.coef) < 1e-8


def test_exact_tie_resolves_to_zero():
    # z equals the threshold exactly: c * x^T y = 0.5 * 2 / 2
    problem = PenalizedLSProblem(design=np.ones((2, 1)), response=np.array([0.5, 0.5]), penalty_level=0.5)
    assert solve(problem).coef[0] == 0.0


def test_zero_column_keeps_zero_coefficient():
    X = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 0.0]])
    problem = PenalizedLSProblem(design=X, response=np.array([1.0, 2.0, 3.0]), weights=np.array([1.0, 0.0]))
    solution = solve(problem)
    assert solution.coef[1] == 0.0
    assert solution.coef[0] == pytest.approx(1.0)


def test_warm_start_reaches_the_same_minimizer():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(25, 6))
    y = X @ np.array([1.0, 0.0, -2.0, 0.0, 0.5, 0.0]) + 0.1 * rng.normal(size=25)
    cold = solve(PenalizedLSProblem(design=X, response=y, penalty_level=0.05), tol=1e-13)
    warm = solve(PenalizedLSProblem(design=X, response=y, penalty_level=0.05, warm_start=np.ones(6)), tol=1e-13)
    assert_allclose(warm.coef, cold.coef, atol=1e-9)


def test_sweep_budget_flags_non_convergence():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(10, 8))
    X[:, 1] = X[:, 0] + 1e-3 * rng.normal(size=10)
    problem = PenalizedLSProblem(design=X, response=rng.normal(size=10))
    solution = solve(problem, tol=1e-15, max_sweeps=1)
    assert not solution.converged
    assert solution.sweeps == 1


def test_objective_value():
    problem = PenalizedLSProblem(design=np.eye(2), response=np.array([3.0, -1.0]), penalty_level=1.0)
    assert objective(problem, np.array([1.0, 0.0])) == pytest.approx(0.25 * 5.0 + 1.0)


def test_solve_rows_matches_one_problem_at_a_time():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(6, 6))
    Y = rng.normal(size=(4, 6))
    weights = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 0.0])
    together = solve_rows(X, Y, scale=2.0, penalty_level=0.2, weights=weights, tol=1e-13)
    for row in range(4):
        single = solve(
            PenalizedLSProblem(design=X, response=Y[row], scale=2.0, penalty_level=0.2, weights=weights), tol=1e-13
        )
        assert_allclose(together.coef[row], single.coef, atol=1e-12)


def test_invalid_problems():
    with pytest.raises(DimensionError):
        PenalizedLSProblem(design=np.eye(2), response=np.zeros(3))
    with pytest.raises(DimensionError):
        PenalizedLSProblem(design=np.eye(2), response=np.zeros(2), weights=np.array([0.5, 1.0]))
    with pytest.raises(DegenerateProblemError):
        PenalizedLSProblem(design=np.eye(2), response=np.array([np.inf, 0.0]))
    with pytest.raises(DegenerateProblemError):
        PenalizedLSProblem(design=np.eye(2), response=np.zeros(2), scale=0.0)
