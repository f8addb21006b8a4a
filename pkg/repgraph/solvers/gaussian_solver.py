"""
Block coordinate descent for the Gaussian node problem

    (1 / 2nT) ||x_j - X_{-j} theta - X_lag alpha - C~^{-1} H||^2
        + lambda ||theta||_1 + beta ||alpha||_1 + gamma ||H_1||_1,

cycling exact minimizations over theta, alpha and H from a zero start.
"""

import logging
from dataclasses import dataclass
from typing import List
from typing import Optional

import numpy as np

from repgraph.core.model import Family
from repgraph.core.model import NodeFit
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.errors import DimensionError
from repgraph.errors import FamilyMismatchError
from repgraph.errors import PreconditionError
from repgraph.solvers import node_problem
from repgraph.solvers.fused_basis import FusedBasis
from repgraph.solvers.fused_basis import from_h
from repgraph.solvers.penalized_ls import DEFAULT_MAX_SWEEPS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BcdSettings:
    """
    :param tol: stop once every block's squared change in an outer iteration is at most tol.
    :param max_outer: outer iteration budget.
    :param inner_tol: coordinate-descent tolerance of the theta and alpha steps.
    :param inner_max_sweeps: coordinate-descent sweep budget.
    :param h_update: "fused" (exact direct solver) or "lasso" (coordinate descent on H).
    """

    tol: float = 1e-8
    max_outer: int = 5000
    inner_tol: float = 1e-10
    inner_max_sweeps: int = DEFAULT_MAX_SWEEPS
    h_update: str = "fused"

    def __post_init__(self):
        if not self.tol > 0.0 or not self.inner_tol > 0.0:
            raise PreconditionError("Solver tolerances must be positive")
        if self.max_outer < 1:
            raise PreconditionError("max_outer must be at least 1")
        node_problem.check_h_update(self.h_update)


def _check_dataset(d: ReplicateDataset):
    if d.family is not Family.GAUSSIAN:
        raise FamilyMismatchError(f"The Gaussian solver needs a Gaussian dataset, got '{d.family.value}'")
    if not d.centered:
        raise PreconditionError("Gaussian node problems need centered data; call center_dataset first")


def fit_node_gaussian(
    d: ReplicateDataset,
    j: int,
    cfg: PenaltyConfig,
    basis: FusedBasis,
    settings: Optional[BcdSettings] = None,
    warm_start: Optional[NodeFit] = None,
) -> NodeFit:
    """
    Fit node j by block coordinate descent.

    :param d: centered Gaussian dataset.
    :param j: 0-based node index.
    :param cfg: penalty levels and dropped blocks.
    :param basis: fused basis built for (d.n, d.T).
    :param settings: stopping and inner-solver settings.
    :param warm_start: an earlier fit of node j to start from instead of zeros.
    :return: the fit, flagged non-converged when max_outer ran out.
    """
    settings = settings or BcdSettings()
    _check_dataset(d)
    design = node_problem.node_design(d, j, basis)
    theta, alpha, delta, h, _ = node_problem.initial_blocks(design, basis, cfg, warm_start)
    x = design.response
    fit_theta = design.others @ theta if design.has_others else np.zeros(design.rows)
    fit_alpha = design.lags @ alpha
    monitor = node_problem.ChangeMonitor(settings.tol)
    trace: List[float] = []
    converged = False
    iteration = 0

    for iteration in range(1, settings.max_outer + 1):
        changes = []
        if design.has_others:
            new = node_problem.lasso_block(
                design.others,
                x - fit_alpha - delta,
                1.0,
                cfg.lam,
                theta,
                settings.inner_tol,
                settings.inner_max_sweeps,
            )
            changes.append(node_problem.squared_change(new, theta))
            theta = new
            fit_theta = design.others @ theta
        if not cfg.drop_alpha:
            new = node_problem.lasso_block(
                design.lags,
                x - fit_theta - delta,
                1.0,
                cfg.beta,
                alpha,
                settings.inner_tol,
                settings.inner_max_sweeps,
            )
            changes.append(node_problem.squared_change(new, alpha))
            alpha = new
            fit_alpha = design.lags @ alpha
        if not cfg.drop_delta:
            delta, new = node_problem.h_step(
                basis,
                x - fit_theta - fit_alpha,
                1.0,
                cfg.gamma,
                h,
                settings.h_update,
                settings.inner_tol,
                settings.inner_max_sweeps,
            )
            changes.append(node_problem.squared_change(new, h))
            h = new
        residual = x - fit_theta - fit_alpha - delta
        penalty = node_problem.penalty_value(cfg, theta, alpha, h, basis)
        trace.append(0.5 * float(residual @ residual) / design.rows + penalty)
        if monitor.settled(iteration, changes):
            converged = True
            break

    if not converged:
        logger.warning("Node %d: block coordinate descent did not settle within %d iterations", j, settings.max_outer)
    logger.debug("Node %d: %d outer iterations, objective %.6g", j, iteration, trace[-1])
    return NodeFit(
        j=j,
        theta=theta,
        alpha=alpha,
        delta=delta,
        h=h,
        iterations=iteration,
        final_objective=trace[-1],
        converged=converged,
        min_change_iteration=monitor.first_min_stop,
        objective_trace=tuple(trace),
    )


def objective_gaussian(
    d: ReplicateDataset,
    j: int,
    theta: np.ndarray,
    alpha: np.ndarray,
    h: np.ndarray,
    cfg: PenaltyConfig,
    basis: FusedBasis,
) -> float:
    """The node objective at (theta, alpha, H); dropped blocks are treated as zero."""
    design = node_problem.node_design(d, j, basis)
    theta = _checked(theta, design.others.shape[1], "theta")
    alpha = np.zeros(d.p) if cfg.drop_alpha else _checked(alpha, d.p, "alpha")
    h = np.zeros(basis.size) if cfg.drop_delta else _checked(h, basis.size, "h")
    residual = design.response - node_problem.linear_predictor(design, theta, alpha, from_h(basis, h))
    return 0.5 * float(residual @ residual) / design.rows + node_problem.penalty_value(cfg, theta, alpha, h, basis)


def kkt_residual_gaussian(d: ReplicateDataset, j: int, fit: NodeFit, cfg: PenaltyConfig, basis: FusedBasis) -> float:
    """Largest subgradient violation of the full Gaussian node problem at ``fit``."""
    design = node_problem.node_design(d, j, basis)
    residual = design.response - node_problem.linear_predictor(design, fit.theta, fit.alpha, fit.delta)
    return node_problem.full_kkt(residual / design.rows, design, basis, cfg, fit)


def _checked(vector, length: int, name: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=float).reshape(-1)
    if vector.shape[0] != length:
        raise DimensionError(f"{name} must have length {length}, got {vector.shape[0]}")
    return vector
