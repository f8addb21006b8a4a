"""
Coordinate descent for the weighted, partially penalized least-squares lasso

    f(b) = (c / 2) * ||y - X b||^2 + penalty_level * sum_k weights_k * |b_k|,   c = scale / N,

the workhorse of every block update. Sweeps are cyclic: one full sweep, then sweeps over the
nonzero (and unpenalized) coordinates until they settle, then a confirming full sweep.
Convergence means the largest coordinate change of a full sweep is below ``tol``.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple
from typing import Optional

import numpy as np
from numba import njit

from repgraph.errors import DegenerateProblemError
from repgraph.errors import DimensionError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 100000


@njit(cache=True, nogil=True)
def _coordinate_descent(X, y, b, c, penalty, weights, col_sq, tol, max_sweeps):  # pylint: disable=invalid-name
    N, K = X.shape  # pylint: disable=invalid-name
    r = y.copy()
    for k in range(K):
        if b[k] != 0.0:
            for i in range(N):
                r[i] -= X[i, k] * b[k]
    active = np.zeros(K, dtype=np.bool_)
    full = True
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        max_change = 0.0
        for k in range(K):
            if not full and not active[k]:
                continue
            if col_sq[k] == 0.0:
                b[k] = 0.0
                active[k] = False
                continue
            grad = 0.0
            for i in range(N):
                grad += X[i, k] * r[i]
            curvature = c * col_sq[k]
            z = c * grad + curvature * b[k]
            threshold = penalty if weights[k] > 0.0 else 0.0
            if z > threshold:
                new = (z - threshold) / curvature
            elif z < -threshold:
                new = (z + threshold) / curvature
            else:
                new = 0.0
            step = new - b[k]
            if step != 0.0:
                for i in range(N):
                    r[i] -= X[i, k] * step
                b[k] = new
                if abs(step) > max_change:
                    max_change = abs(step)
            active[k] = new != 0.0 or weights[k] == 0.0
        sweeps += 1
        if full:
            if max_change < tol:
                converged = True
                break
            full = False
        elif max_change < tol:
            full = True
    return sweeps, converged


@njit(cache=True, nogil=True)
def _coordinate_descent_rows(X, Y, B, c, penalty, weights, col_sq, tol, max_sweeps):  # pylint: disable=invalid-name
    total = 0
    all_converged = True
    for row in range(Y.shape[0]):
        b = B[row].copy()
        sweeps, converged = _coordinate_descent(X, Y[row], b, c, penalty, weights, col_sq, tol, max_sweeps)
        B[row] = b
        total += sweeps
        all_converged = all_converged and converged
    return total, all_converged


@dataclass(frozen=True, eq=False)
class PenalizedLSProblem:
    """
    :param design: N x K matrix X.
    :param response: length-N vector y.
    :param scale: positive factor; the loss is (scale / (2N)) ||y - X b||^2.
    :param penalty_level: nonnegative l1 level.
    :param weights: {0, 1} penalty indicators (default all ones).
    :param warm_start: optional initial coefficients.
    """

    design: np.ndarray
    response: np.ndarray
    scale: float = 1.0
    penalty_level: float = 0.0
    weights: Optional[np.ndarray] = None
    warm_start: Optional[np.ndarray] = None

    def __post_init__(self):
        design = np.asfortranarray(self.design, dtype=float)
        response = np.ascontiguousarray(self.response, dtype=float).reshape(-1)
        if design.ndim != 2 or design.shape[0] != response.shape[0]:
            raise DimensionError(f"Design {design.shape} does not match response of length {response.shape[0]}")
        n_rows, n_cols = design.shape
        if n_rows < 1 or n_cols < 1:
            raise DimensionError("Penalized least squares needs N >= 1 and K >= 1")
        weights = np.ones(n_cols) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != n_cols or not np.all((weights == 0.0) | (weights == 1.0)):
            raise DimensionError("Penalty weights must be a {0,1} vector with one entry per column")
        warm = np.zeros(n_cols) if self.warm_start is None else np.asarray(self.warm_start, dtype=float).reshape(-1)
        if warm.shape[0] != n_cols:
            raise DimensionError("Warm start must have one entry per column")
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(response)) and np.all(np.isfinite(warm))):
            raise DegenerateProblemError("Penalized least-squares problem contains non-finite values")
        if not self.scale > 0.0 or self.penalty_level < 0.0:
            raise DegenerateProblemError("scale must be positive and penalty_level nonnegative")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "warm_start", warm)

    @property
    def c(self) -> float:
        return self.scale / self.design.shape[0]


class LassoSolution(NamedTuple):
    coef: np.ndarray
    sweeps: int
    converged: bool


def solve(
    problem: PenalizedLSProblem, tol: float = DEFAULT_TOL, max_sweeps: int = DEFAULT_MAX_SWEEPS
) -> LassoSolution:
    """
    Minimize the problem's objective by cyclic coordinate descent.

    Exact soft-thresholding updates produce exact zeros; a coordinate exactly at the
    threshold resolves to zero. Zero columns keep a zero coefficient.

    :return: the coefficients, the number of sweeps and whether ``tol`` was met.
    """
    col_sq = np.einsum("ij,ij->j", problem.design, problem.design)
    b = problem.warm_start.copy()
    sweeps, converged = _coordinate_descent(
        problem.design, problem.response, b, problem.c, problem.penalty_level, problem.weights, col_sq, tol, max_sweeps
    )
    if not converged:
        logger.warning("Coordinate descent stopped after %d sweeps without meeting tol=%g", sweeps, tol)
    return LassoSolution(coef=b, sweeps=int(sweeps), converged=bool(converged))


def solve_rows(
    design: np.ndarray,
    responses: np.ndarray,
    scale: float,
    penalty_level: float,
    weights: np.ndarray,
    warm_start: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> LassoSolution:
    """
    Solve one problem per row of ``responses`` against a shared design.

    Row m of the returned coefficient matrix minimizes the objective for ``responses[m]``.
    """
    design = np.asfortranarray(design, dtype=float)
    responses = np.ascontiguousarray(responses, dtype=float)
    if responses.ndim != 2 or responses.shape[1] != design.shape[0]:
        raise DimensionError(f"Responses {responses.shape} do not match design {design.shape}")
    coef = np.zeros((responses.shape[0], design.shape[1])) if warm_start is None else np.array(warm_start, dtype=float)
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(responses))):
        raise DegenerateProblemError("Penalized least-squares problem contains non-finite values")
    col_sq = np.einsum("ij,ij->j", design, design)
    weights = np.asarray(weights, dtype=float)
    c = scale / design.shape[0]
    sweeps, converged = _coordinate_descent_rows(
        design, responses, coef, c, penalty_level, weights, col_sq, tol, max_sweeps
    )
    return LassoSolution(coef=coef, sweeps=int(sweeps), converged=bool(converged))


def objective(problem: PenalizedLSProblem, b: np.ndarray) -> float:
    residual = problem.response - problem.design @ b
    penalty = problem.penalty_level * float(np.sum(problem.weights * np.abs(b))) if problem.penalty_level else 0.0
    return 0.5 * problem.c * float(residual @ residual) + penalty


def kkt_residual(problem: PenalizedLSProblem, b: np.ndarray) -> float:
    """Largest coordinatewise violation of the subgradient optimality conditions at ``b``."""
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != problem.design.shape[1]:
        raise DimensionError("Coefficient vector does not match the design")
    gradient = problem.c * (problem.design.T @ (problem.response - problem.design @ b))
    return float(np.max(coordinate_violations(gradient, b, problem.penalty_level, problem.weights)))


def coordinate_violations(
    gradient: np.ndarray, b: np.ndarray, penalty_level: float, weights: np.ndarray
) -> np.ndarray:
    """
    Per-coordinate KKT violations given the negative smooth gradient ``c X^T (y - X b)``.

    Penalized zero coordinates may carry a gradient up to the penalty level; penalized nonzero
    ones must match ``penalty_level * sign(b_k)``; unpenalized ones must have zero gradient.
    """
    violations = np.abs(gradient).astype(float)
    penalized = weights > 0.0
    at_zero = penalized & (b == 0.0)
    violations[at_zero] = np.maximum(0.0, np.abs(gradient[at_zero]) - penalty_level)
    moving = penalized & (b != 0.0)
    violations[moving] = np.abs(gradient[moving] - penalty_level * np.sign(b[moving]))
    return violations
