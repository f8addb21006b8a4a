"""
Pieces shared by the Gaussian and the generalized node solvers: the node's design matrices,
the exact block steps, the penalty value, the full-problem KKT residual and the
block-change stopping rule.
"""

import logging
from dataclasses import dataclass
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from repgraph.core.model import NodeFit
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.core.model import lag_stack
from repgraph.core.model import others_stack
from repgraph.errors import DimensionError
from repgraph.errors import PreconditionError
from repgraph.solvers import fused_signal
from repgraph.solvers import penalized_ls
from repgraph.solvers.fused_basis import FusedBasis
from repgraph.solvers.fused_basis import to_h

logger = logging.getLogger(__name__)

H_UPDATES = ("fused", "lasso")


@dataclass(frozen=True, eq=False)
class NodeDesign:
    """The response x_j and the two design matrices of node j, all with nT rows."""

    j: int
    response: np.ndarray
    others: np.ndarray
    lags: np.ndarray
    n: int
    T: int  # pylint: disable=invalid-name

    @property
    def rows(self) -> int:
        return self.n * self.T

    @property
    def has_others(self) -> bool:
        return self.others.shape[1] > 0


def node_design(d: ReplicateDataset, j: int, basis: FusedBasis) -> NodeDesign:
    if basis.n != d.n or basis.T != d.T:
        raise DimensionError(f"Basis built for n={basis.n}, T={basis.T} but dataset has n={d.n}, T={d.T}")
    return NodeDesign(
        j=j,
        response=d.node_response(j),
        others=np.asfortranarray(others_stack(d, j)),
        lags=np.asfortranarray(lag_stack(d)),
        n=d.n,
        T=d.T,
    )


def check_h_update(h_update: str):
    if h_update not in H_UPDATES:
        raise PreconditionError(f"Unknown H update '{h_update}' (expected one of {', '.join(H_UPDATES)})")


def lasso_block(
    design: np.ndarray, residual: np.ndarray, scale: float, level: float, warm: np.ndarray, tol: float, max_sweeps: int
) -> np.ndarray:
    """Exact minimizer of (scale / 2N) ||residual - design b||^2 + level ||b||_1 started from ``warm``."""
    problem = penalized_ls.PenalizedLSProblem(
        design=design, response=residual, scale=scale, penalty_level=level, warm_start=warm
    )
    return penalized_ls.solve(problem, tol=tol, max_sweeps=max_sweeps).coef


def h_step(
    basis: FusedBasis,
    residual: np.ndarray,
    scale: float,
    gamma: float,
    current_h: np.ndarray,
    h_update: str,
    tol: float,
    max_sweeps: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact minimizer over H of (scale / 2nT) ||residual - C~^{-1} H||^2 + gamma ||H_1||_1.

    :return: (delta, h) with delta = C~^{-1} h.
    """
    blocks = residual.reshape(basis.n, basis.T)
    if h_update == "fused":
        delta = fused_signal.denoise_rows(blocks, gamma * basis.size / scale).reshape(-1)
        return delta, to_h(basis, delta)
    weights = np.concatenate([np.ones(basis.T - 1), [0.0]])
    solution = penalized_ls.solve_rows(
        basis.M_inv,
        blocks,
        scale=scale / basis.n,
        penalty_level=gamma,
        weights=weights,
        warm_start=basis.to_blocks(current_h),
        tol=tol,
        max_sweeps=max_sweeps,
    )
    h = basis.from_blocks(solution.coef)
    return (solution.coef @ basis.M_inv.T).reshape(-1), h


def weighted_l1(level: float, vector: np.ndarray) -> float:
    total = float(np.abs(vector).sum())
    return level * total if total > 0.0 else 0.0


def penalty_value(cfg: PenaltyConfig, theta: np.ndarray, alpha: np.ndarray, h: np.ndarray, basis: FusedBasis) -> float:
    """lambda ||theta||_1 + beta ||alpha||_1 + gamma ||H_1||_1, dropped blocks contributing nothing."""
    value = weighted_l1(cfg.lam, theta)
    if not cfg.drop_alpha:
        value += weighted_l1(cfg.beta, alpha)
    if not cfg.drop_delta:
        value += weighted_l1(cfg.gamma, h[: basis.n_differences])
    return value


def linear_predictor(design: NodeDesign, theta, alpha, delta, intercept: float = 0.0) -> np.ndarray:
    eta = design.lags @ alpha + delta + intercept
    if design.has_others:
        eta = eta + design.others @ theta
    return eta


def full_kkt(
    neg_gradient: np.ndarray, design: NodeDesign, basis: FusedBasis, cfg: PenaltyConfig, fit: NodeFit
) -> float:
    """
    Largest subgradient violation of the full node problem.

    :param neg_gradient: minus the gradient of the smooth loss with respect to the linear
        predictor, e.g. (x - eta) / nT for the Gaussian family.
    """
    violations: List[float] = [0.0]
    if design.has_others:
        grad = design.others.T @ neg_gradient
        flags = np.ones_like(grad)
        violations.append(float(np.max(penalized_ls.coordinate_violations(grad, fit.theta, cfg.lam, flags))))
    if not cfg.drop_alpha:
        grad = design.lags.T @ neg_gradient
        flags = np.ones_like(grad)
        violations.append(float(np.max(penalized_ls.coordinate_violations(grad, fit.alpha, cfg.beta, flags))))
    if not cfg.drop_delta:
        grad_blocks = neg_gradient.reshape(basis.n, basis.T) @ basis.M_inv
        grad = basis.from_blocks(grad_blocks)
        flags = basis.penalty_weights()
        violations.append(float(np.max(penalized_ls.coordinate_violations(grad, fit.h, cfg.gamma, flags))))
    return max(violations)


class ChangeMonitor:
    """
    Block-change stopping rule.

    Stops once the largest squared block change of an outer iteration is at most ``tol``;
    also remembers the first iteration at which the smallest block change dropped to ``tol``.
    """

    def __init__(self, tol: float):
        if not tol > 0.0:
            raise PreconditionError(f"Outer tolerance must be positive, got {tol}")
        self.tol = tol
        self.first_min_stop: Optional[int] = None

    def settled(self, iteration: int, changes: List[float]) -> bool:
        if not changes:
            return True
        if self.first_min_stop is None and min(changes) <= self.tol:
            self.first_min_stop = iteration
        return max(changes) <= self.tol


def squared_change(new: np.ndarray, old: np.ndarray) -> float:
    step = new - old
    return float(step @ step)


def initial_blocks(
    design: NodeDesign, basis: FusedBasis, cfg: PenaltyConfig, warm_start: Optional[NodeFit]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """Zeros, or the blocks of a previous fit of the same node when they fit this problem."""
    p = design.lags.shape[1]
    theta = np.zeros(p - 1)
    alpha = np.zeros(p)
    delta = np.zeros(basis.size)
    h = np.zeros(basis.size)
    intercept = 0.0
    if warm_start is not None:
        if warm_start.j != design.j or warm_start.p != p or warm_start.delta.shape[0] != basis.size:
            raise DimensionError(f"Warm start for node {warm_start.j} does not fit node {design.j}")
        theta = np.array(warm_start.theta)
        if not cfg.drop_alpha:
            alpha = np.array(warm_start.alpha)
        if not cfg.drop_delta:
            delta = np.array(warm_start.delta)
            h = np.array(warm_start.h)
        intercept = warm_start.intercept
    return theta, alpha, delta, h, intercept
