"""
End-to-end checks with runtime bounds: solver optimality on random instances, descent, the
constant-effect limit, recovery on simulated scenarios and the Gibbs sampler's law.
"""

import numpy as np
import pytest
import timeout_decorator

from repgraph.core.families import family_ising
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import Rule
from repgraph.evaluation.evaluation import path_auc
from repgraph.evaluation.evaluation import roc_path
from repgraph.graphs.graph_assembly import lambda_ceiling
from repgraph.graphs.graph_assembly import select_lambda_for_edges
from repgraph.simulation import simgen
from repgraph.simulation.scenarios import ScenarioOptions
from repgraph.simulation.scenarios import build_scenario
from repgraph.simulation.simgen import LatentSpec
from repgraph.simulation.simgen import SimTruth
from repgraph.solvers import fused_basis
from repgraph.solvers.gaussian_solver import BcdSettings
from repgraph.solvers.gaussian_solver import fit_node_gaussian
from repgraph.solvers.gaussian_solver import kkt_residual_gaussian
from repgraph.solvers.glm_solver import GgdSettings
from repgraph.solvers.glm_solver import fit_node_glm
from repgraph.tuning.tuning import lambda_grid
from repgraph.tuning.tuning import log_grid
from tests.oracles import fista_node
from tests.oracles import ising_distribution
from tests.oracles import random_gaussian_dataset
from tests.oracles import random_ising_dataset

pytestmark = pytest.mark.acceptance

LEVELS = (0.01, 0.1, 1.0)
TIGHT = BcdSettings(tol=1e-14, max_outer=20000, inner_tol=1e-13)
SEEDS = range(10)


def random_instances(count: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n, T, p = int(rng.integers(2, 7)), int(rng.integers(2, 9)), int(rng.integers(2, 11))
        cfg = PenaltyConfig(lam=rng.choice(LEVELS), beta=rng.choice(LEVELS), gamma=rng.choice(LEVELS))
        yield rng, n, T, p, cfg, int(rng.integers(p))


@timeout_decorator.timeout(120)
def test_gaussian_solver_is_optimal_on_random_instances():
    for rng, n, T, p, cfg, j in random_instances(50, seed=100):
        d = random_gaussian_dataset(rng, n, T, p)
        basis = fused_basis.build(n, T)
        fit = fit_node_gaussian(d, j, cfg, basis, TIGHT)
        assert kkt_residual_gaussian(d, j, fit, cfg, basis) < 1e-5
        oracle = fista_node(d, j, cfg, max_iter=20000)
        constant = 0.5 * float(np.mean(d.node_response(j) ** 2))
        assert fit.final_objective <= oracle.objective + constant + 1e-6


@timeout_decorator.timeout(120)
def test_both_solvers_descend_every_iteration():
    for rng, n, T, p, cfg, j in random_instances(50, seed=200):
        basis = fused_basis.build(n, T)
        gaussian = fit_node_gaussian(random_gaussian_dataset(rng, n, T, p), j, cfg, basis)
        assert np.all(np.diff(gaussian.objective_trace) <= 1e-12)
        ising = random_ising_dataset(rng, n, T, p)
        glm = fit_node_glm(ising, j, family_ising(), cfg, basis, GgdSettings(max_outer=2000))
        assert np.all(np.diff(glm.objective_trace) <= 1e-10)


@timeout_decorator.timeout(60)
def test_huge_gamma_gives_constant_subject_effects():
    for rng, n, T, p, cfg, j in random_instances(20, seed=300):
        d = random_gaussian_dataset(rng, n, T, p)
        fit = fit_node_gaussian(d, j, PenaltyConfig(lam=cfg.lam, beta=cfg.beta, gamma=1e6), fused_basis.build(n, T))
        blocks = np.asarray(fit.delta).reshape(n, T)
        assert np.max(blocks.max(axis=1) - blocks.min(axis=1)) < 1e-6


def _recovered(d, truth, base: PenaltyConfig) -> int:
    selection = select_lambda_for_edges(d, base, 6, Rule.INTERSECTION)
    return len(selection.graph.edges & truth.edges) if selection.hit else -1


@timeout_decorator.timeout(120)
def test_toy_graph_is_recovered_where_the_plain_baseline_fails():
    full = PenaltyConfig(lam=0.0, beta=0.02, gamma=0.002)
    baseline = PenaltyConfig(lam=0.0, drop_alpha=True, drop_delta=True)
    wins = 0
    for seed in SEEDS:
        d, truth = build_scenario("toy", n=50, T=20, p=5, seed=seed)
        full_hits = _recovered(d, truth, full)
        baseline_hits = _recovered(d, truth, baseline)
        wins += full_hits >= 5 and 0 <= baseline_hits <= 4
    assert wins >= 8


def _auc(d, truth, base: PenaltyConfig, count: int = 15) -> float:
    ceiling = lambda_ceiling(d)
    grid = lambda_grid(log_grid(0.01 * ceiling, ceiling, count), base)
    return path_auc(roc_path(d, grid, truth.edges, Rule.INTERSECTION))


@timeout_decorator.timeout(900)
def test_piecewise_confounders_with_sparse_lags_beat_the_baseline():
    full, baseline = [], []
    for seed in SEEDS:
        d, truth = build_scenario("combined-piecewise", n=30, T=15, p=30, seed=seed)
        full.append(_auc(d, truth, PenaltyConfig(lam=0.0, beta=0.02, gamma=1.0)))
        baseline.append(_auc(d, truth, PenaltyConfig(lam=0.0, drop_alpha=True, drop_delta=True)))
    assert np.mean(full) >= 0.65
    assert 0.35 <= np.mean(baseline) <= 0.65


@timeout_decorator.timeout(600)
def test_lag_block_helps_on_autoregressive_replicates():
    wins = 0
    for seed in SEEDS:
        d, truth = build_scenario("ar1-diagonal", n=30, T=15, p=30, seed=seed)
        with_lags = _auc(d, truth, PenaltyConfig(lam=0.0, beta=0.1, gamma=1e6))
        without_lags = _auc(d, truth, PenaltyConfig(lam=0.0, gamma=1e6, drop_alpha=True))
        wins += with_lags > without_lags
    assert wins >= 8


@timeout_decorator.timeout(120)
def test_gibbs_sampler_matches_exact_enumeration():
    theta = np.array([[0.2, 0.5, -0.4], [0.5, -0.3, 0.3], [-0.4, 0.3, 0.1]])
    truth = SimTruth(theta=theta, sigma=np.eye(3), p=3, A=np.zeros((3, 3)))
    samples = 20000
    d, _ = simgen.gen_ising_gibbs(
        1, samples, truth, LatentSpec(), burn_in=1000, thin=50, seed=9, burn_in_per_replicate=False
    )
    states, counts = np.unique(d.values[0].astype(int), axis=0, return_counts=True)
    empirical = {tuple(state.tolist()): count / samples for state, count in zip(states, counts)}
    exact = ising_distribution(theta)
    total_variation = 0.5 * sum(abs(empirical.get(state, 0.0) - prob) for state, prob in exact.items())
    assert total_variation < 0.02
    defaults = ScenarioOptions()
    assert (defaults.burn_in, defaults.thin) == (10_000, 1_000)
