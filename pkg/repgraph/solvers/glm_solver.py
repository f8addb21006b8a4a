"""
Generalized gradient descent for exponential-family node problems.

Each outer iteration makes one pass over the theta, alpha and H blocks (and the optional
intercept). A block step replaces the average negative log-likelihood by its quadratic
majorizer with curvature L around the current linear predictor and minimizes it exactly,
so every step is a penalized least-squares problem with response

    r = x_j / L + (the block's own predictor) - D'(eta) / L

and scale L.
"""

import logging
from dataclasses import dataclass
from typing import List
from typing import Optional

import numpy as np

from repgraph.core.families import NodeFamily
from repgraph.core.model import Family
from repgraph.core.model import NodeFit
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.errors import DivergenceError
from repgraph.errors import FamilyMismatchError
from repgraph.errors import PreconditionError
from repgraph.solvers import node_problem
from repgraph.solvers.fused_basis import FusedBasis
from repgraph.solvers.fused_basis import from_h
from repgraph.solvers.penalized_ls import DEFAULT_MAX_SWEEPS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GgdSettings:
    """
    :param lipschitz_L: majorization constant; None uses the family's default.
    :param tol: stop once every block's squared change in an outer iteration is at most tol.
    :param max_outer: outer iteration budget.
    :param inner_tol: coordinate-descent tolerance of the block steps.
    :param inner_max_sweeps: coordinate-descent sweep budget.
    :param intercept: fit an unpenalized scalar intercept (Poisson only).
    :param h_update: "fused" or "lasso", as for the Gaussian solver.
    """

    lipschitz_L: Optional[float] = None  # pylint: disable=invalid-name
    tol: float = 1e-8
    max_outer: int = 5000
    inner_tol: float = 1e-10
    inner_max_sweeps: int = DEFAULT_MAX_SWEEPS
    intercept: bool = False
    h_update: str = "fused"

    def __post_init__(self):
        if not self.tol > 0.0 or not self.inner_tol > 0.0:
            raise PreconditionError("Solver tolerances must be positive")
        if self.max_outer < 1:
            raise PreconditionError("max_outer must be at least 1")
        node_problem.check_h_update(self.h_update)

    def resolve_L(self, family: NodeFamily) -> float:  # pylint: disable=invalid-name
        """The curvature to use for ``family``; must majorize the family's D''."""
        value = family.lipschitz_L if self.lipschitz_L is None else float(self.lipschitz_L)
        bound = family.curvature_bound
        if not np.isfinite(value) or value < bound:
            raise PreconditionError(
                f"L={value} does not majorize the {family.name.value} family (needs at least {bound})"
            )
        return value


class _Predictor:
    """Keeps eta = X_{-j} theta + X_lag alpha + Delta + b0 in sync with the blocks."""

    def __init__(self, design: node_problem.NodeDesign, family: NodeFamily, theta, alpha, delta, intercept):
        self.design = design
        self.family = family
        self.fit_theta = design.others @ theta if design.has_others else np.zeros(design.rows)
        self.fit_alpha = design.lags @ alpha
        self.delta = delta
        self.intercept = intercept

    @property
    def eta(self) -> np.ndarray:
        return self.fit_theta + self.fit_alpha + self.delta + self.intercept

    def check_cap(self):
        cap = self.family.eta_cap
        if cap is not None:
            peak = float(np.max(self.eta))
            if peak > cap:
                raise DivergenceError(
                    f"Node {self.design.j}: linear predictor reached {peak:.6g}, above the admissible cap {cap:g}",
                    cap=cap,
                )

    def working_response(self, own: np.ndarray, L: float) -> np.ndarray:  # pylint: disable=invalid-name
        return (self.design.response - self.family.mean(self.eta)) / L + own


def _check_inputs(d: ReplicateDataset, family: NodeFamily, settings: GgdSettings):
    if family.name is not d.family:
        raise FamilyMismatchError(f"Family '{family.name.value}' does not match the '{d.family.value}' dataset")
    if settings.intercept and family.name is not Family.POISSON:
        raise FamilyMismatchError("The optional intercept is only available for Poisson node problems")


def fit_node_glm(
    d: ReplicateDataset,
    j: int,
    family: NodeFamily,
    cfg: PenaltyConfig,
    basis: FusedBasis,
    settings: Optional[GgdSettings] = None,
    warm_start: Optional[NodeFit] = None,
) -> NodeFit:
    """
    Fit node j by generalized gradient descent with inner block coordinate descent.

    :raises DivergenceError: when a Poisson linear predictor exceeds the family's cap.
    :return: the fit; ``final_objective`` is the penalized average negative log-likelihood.
    """
    settings = settings or GgdSettings()
    _check_inputs(d, family, settings)
    L = settings.resolve_L(family)  # pylint: disable=invalid-name
    design = node_problem.node_design(d, j, basis)
    theta, alpha, delta, h, intercept = node_problem.initial_blocks(design, basis, cfg, warm_start)
    if not settings.intercept:
        intercept = 0.0
    predictor = _Predictor(design, family, theta, alpha, delta, intercept)
    monitor = node_problem.ChangeMonitor(settings.tol)
    trace: List[float] = []
    converged = False
    iteration = 0

    for iteration in range(1, settings.max_outer + 1):
        changes = []
        if design.has_others:
            response = predictor.working_response(predictor.fit_theta, L)
            new = node_problem.lasso_block(
                design.others, response, L, cfg.lam, theta, settings.inner_tol, settings.inner_max_sweeps
            )
            changes.append(node_problem.squared_change(new, theta))
            theta = new
            predictor.fit_theta = design.others @ theta
            predictor.check_cap()
        if not cfg.drop_alpha:
            response = predictor.working_response(predictor.fit_alpha, L)
            new = node_problem.lasso_block(
                design.lags, response, L, cfg.beta, alpha, settings.inner_tol, settings.inner_max_sweeps
            )
            changes.append(node_problem.squared_change(new, alpha))
            alpha = new
            predictor.fit_alpha = design.lags @ alpha
            predictor.check_cap()
        if not cfg.drop_delta:
            response = predictor.working_response(predictor.delta, L)
            delta, new = node_problem.h_step(
                basis, response, L, cfg.gamma, h, settings.h_update, settings.inner_tol, settings.inner_max_sweeps
            )
            changes.append(node_problem.squared_change(new, h))
            h = new
            predictor.delta = delta
            predictor.check_cap()
        if settings.intercept:
            new_intercept = float(np.mean(predictor.working_response(np.full(design.rows, predictor.intercept), L)))
            changes.append((new_intercept - predictor.intercept) ** 2)
            predictor.intercept = new_intercept
            predictor.check_cap()
        trace.append(
            family.loss(design.response, predictor.eta) + node_problem.penalty_value(cfg, theta, alpha, h, basis)
        )
        if monitor.settled(iteration, changes):
            converged = True
            break

    if not converged:
        logger.warning("Node %d: gradient descent did not settle within %d iterations", j, settings.max_outer)
    logger.debug("Node %d (%s): %d outer iterations, objective %.6g", j, family.name.value, iteration, trace[-1])
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
        intercept=predictor.intercept,
        objective_trace=tuple(trace),
    )


def objective_glm(
    d: ReplicateDataset,
    j: int,
    family: NodeFamily,
    theta: np.ndarray,
    alpha: np.ndarray,
    h: np.ndarray,
    cfg: PenaltyConfig,
    basis: FusedBasis,
    intercept: float = 0.0,
) -> float:
    """Penalized average negative log-likelihood of node j; dropped blocks are treated as zero."""
    design = node_problem.node_design(d, j, basis)
    alpha = np.zeros(d.p) if cfg.drop_alpha else np.asarray(alpha, dtype=float)
    h = np.zeros(basis.size) if cfg.drop_delta else np.asarray(h, dtype=float)
    eta = node_problem.linear_predictor(design, np.asarray(theta, dtype=float), alpha, from_h(basis, h), intercept)
    return family.loss(design.response, eta) + node_problem.penalty_value(cfg, theta, alpha, h, basis)


def kkt_residual_glm(
    d: ReplicateDataset, j: int, family: NodeFamily, fit: NodeFit, cfg: PenaltyConfig, basis: FusedBasis
) -> float:
    """Largest subgradient violation of the true (not majorized) node problem at ``fit``."""
    design = node_problem.node_design(d, j, basis)
    eta = node_problem.linear_predictor(design, fit.theta, fit.alpha, fit.delta, fit.intercept)
    neg_gradient = (design.response - family.mean(eta)) / design.rows
    violation = node_problem.full_kkt(neg_gradient, design, basis, cfg, fit)
    if fit.intercept != 0.0:
        violation = max(violation, abs(float(neg_gradient.sum())))
    return violation


def refit_delta(
    d: ReplicateDataset,
    j: int,
    family: NodeFamily,
    theta: np.ndarray,
    alpha: np.ndarray,
    cfg: PenaltyConfig,
    basis: FusedBasis,
    settings: Optional[GgdSettings] = None,
    intercept: float = 0.0,
) -> np.ndarray:
    """
    Re-estimate the latent-effect block of node j with theta and alpha frozen.

    Runs H steps only (a single exact step for the Gaussian family) until the squared
    change of H is at most ``settings.tol``.

    :return: Delta, length nT; zeros when the latent block is dropped.
    """
    settings = settings or GgdSettings()
    if cfg.drop_delta:
        return np.zeros(basis.size)
    if family.name is not d.family:
        raise FamilyMismatchError(f"Family '{family.name.value}' does not match the '{d.family.value}' dataset")
    L = settings.resolve_L(family)  # pylint: disable=invalid-name
    design = node_problem.node_design(d, j, basis)
    alpha = np.zeros(d.p) if cfg.drop_alpha else np.asarray(alpha, dtype=float)
    predictor = _Predictor(design, family, np.asarray(theta, dtype=float), alpha, np.zeros(basis.size), intercept)
    h = np.zeros(basis.size)
    steps = 1 if family.name is Family.GAUSSIAN else settings.max_outer
    for _ in range(steps):
        response = predictor.working_response(predictor.delta, L)
        delta, new = node_problem.h_step(
            basis, response, L, cfg.gamma, h, settings.h_update, settings.inner_tol, settings.inner_max_sweeps
        )
        change = node_problem.squared_change(new, h)
        h = new
        predictor.delta = delta
        predictor.check_cap()
        if change <= settings.tol:
            break
    return predictor.delta
