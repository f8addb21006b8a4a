"""
Independent reference computations shared by the tests: a restarted FISTA solver of the full
node problem on a dense design, exact Ising enumeration and small data builders.
"""

import itertools
from typing import Dict
from typing import NamedTuple
from typing import Tuple

import numpy as np

from repgraph.core.model import Family
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.core.model import center_dataset

LOG_PARTITION = {
    Family.GAUSSIAN: lambda eta: 0.5 * eta**2,
    Family.ISING: lambda eta: np.logaddexp(0.0, eta),
    Family.POISSON: np.exp,
}
MEAN = {
    Family.GAUSSIAN: lambda eta: eta,
    Family.ISING: lambda eta: 1.0 / (1.0 + np.exp(-eta)),
    Family.POISSON: np.exp,
}
CURVATURE = {Family.GAUSSIAN: 1.0, Family.ISING: 0.25}


class OracleFit(NamedTuple):
    objective: float
    coef: np.ndarray
    iterations: int


def dense_node_problem(d: ReplicateDataset, j: int, cfg: PenaltyConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The node problem as one lasso over b = (theta, alpha, H) with a dense design.

    :return: (x_j, design, per-coordinate penalty levels).
    """
    n, T, p = d.values.shape  # pylint: disable=invalid-name
    stacked = d.values.reshape(n * T, p)
    lagged = np.zeros_like(d.values)
    lagged[:, 1:, :] = d.values[:, :-1, :]
    lagged = lagged.reshape(n * T, p)
    others = np.delete(stacked, j, axis=1)

    diff = np.zeros((T - 1, T))
    for r in range(T - 1):
        diff[r, r], diff[r, r + 1] = -1.0, 1.0
    transform = np.vstack([np.kron(np.eye(n), diff), np.kron(np.eye(n), np.ones((1, T)))])
    latent = np.linalg.inv(transform)

    blocks = [others]
    levels = [np.full(p - 1, cfg.lam)]
    if not cfg.drop_alpha:
        blocks.append(lagged)
        levels.append(np.full(p, cfg.beta))
    if not cfg.drop_delta:
        blocks.append(latent)
        levels.append(np.concatenate([np.full(n * (T - 1), cfg.gamma), np.zeros(n)]))
    return stacked[:, j], np.hstack(blocks), np.concatenate(levels)


def fista_node(
    d: ReplicateDataset, j: int, cfg: PenaltyConfig, max_iter: int = 200_000, tol: float = 1e-13
) -> OracleFit:
    """Restarted FISTA on the dense node problem of a Gaussian or Ising dataset."""
    x, design, levels = dense_node_problem(d, j, cfg)
    rows = design.shape[0]
    log_partition, mean = LOG_PARTITION[d.family], MEAN[d.family]
    step = rows / (CURVATURE[d.family] * np.linalg.norm(design, 2) ** 2)

    def objective(b):
        eta = design @ b
        return float(np.mean(log_partition(eta) - x * eta) + np.sum(levels * np.abs(b)))

    def prox_step(point):
        gradient = design.T @ (mean(design @ point) - x) / rows
        moved = point - step * gradient
        return np.sign(moved) * np.maximum(np.abs(moved) - step * levels, 0.0)

    b = np.zeros(design.shape[1])
    momentum = b.copy()
    t = 1.0
    current = objective(b)
    iteration = 0
    for iteration in range(1, max_iter + 1):
        new = prox_step(momentum)
        new_value = objective(new)
        if new_value > current:
            momentum = b.copy()
            t = 1.0
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = new + (t - 1.0) / t_next * (new - b)
        change = float(np.max(np.abs(new - b)))
        b, current, t = new, new_value, t_next
        if change < tol:
            break
    return OracleFit(objective=current, coef=b, iterations=iteration)


def ising_distribution(theta: np.ndarray) -> Dict[Tuple[int, ...], float]:
    """Exact probabilities of P(x) proportional to exp(sum_j theta_jj x_j + sum_{j<k} theta_jk x_j x_k)."""
    p = theta.shape[0]
    weights = {}
    for state in itertools.product((0, 1), repeat=p):
        vector = np.array(state, dtype=float)
        energy = float(np.diag(theta) @ vector) + float(vector @ np.triu(theta, k=1) @ vector)
        weights[state] = np.exp(energy)
    total = sum(weights.values())
    return {state: weight / total for state, weight in weights.items()}


def random_gaussian_dataset(
    rng: np.random.Generator, n: int, T: int, p: int  # pylint: disable=invalid-name
) -> ReplicateDataset:
    """Centered Gaussian data with some temporal dependence."""
    values = rng.standard_normal((n, T, p))
    values[:, 1:, :] += 0.5 * values[:, :-1, :]
    return center_dataset(ReplicateDataset(values=values))


def random_ising_dataset(
    rng: np.random.Generator, n: int, T: int, p: int  # pylint: disable=invalid-name
) -> ReplicateDataset:
    values = (rng.random((n, T, p)) < 0.4).astype(float)
    values[:, 1:, 0] = values[:, :-1, 1]
    # both outcomes in every subject and node
    values[:, 0, :] = 1.0
    values[:, -1, :] = 0.0
    return ReplicateDataset(values=values, family=Family.ISING)
