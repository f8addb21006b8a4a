"""
Named simulation scenarios built from the generators in :mod:`repgraph.simulation.simgen`.

==================  =======================  ===================  ==========================
name                observed graph           transition A         confounders
==================  =======================  ===================  ==========================
ar1-diagonal        10% pairs at 0.3         0.9 I                none
ar1-sparse          10% pairs at 0.3         5% entries at 0.3    none
latent-constant     partitioned, q latent    none                 constant per subject
latent-piecewise    partitioned, q latent    none                 one change at floor(T/2)
combined-constant   partitioned, q latent    5% entries at 0.3    constant per subject
combined-piecewise  partitioned, q latent    5% entries at 0.3    one change at floor(T/2)
ising               uniform +-[0.25, 0.5]    0.9 I                one change at floor(T/2)
toy                 fixed 5 nodes, 6 edges   fixed cross-lags     one confounder, piecewise
==================  =======================  ===================  ==========================
"""

import logging
from dataclasses import dataclass
from typing import Any
from typing import Dict
from typing import Tuple

import numpy as np

from repgraph.core.model import ReplicateDataset
from repgraph.errors import UsageError
from repgraph.simulation import simgen
from repgraph.simulation.simgen import LatentSpec
from repgraph.simulation.simgen import PrecisionSpec
from repgraph.simulation.simgen import SimTruth
from repgraph.simulation.simgen import TransitionSpec

logger = logging.getLogger(__name__)

SCENARIOS = (
    "ar1-diagonal",
    "ar1-sparse",
    "latent-constant",
    "latent-piecewise",
    "combined-constant",
    "combined-piecewise",
    "ising",
    "toy",
)

TOY_EDGES = ((0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3))
TOY_CROSS_LAGS = ((0, 3), (1, 4), (2, 0), (4, 2))


@dataclass(frozen=True)
class ScenarioOptions:
    """Generator knobs that are not part of the scenario name."""

    q: int = 5
    burn_in: int = 10_000
    thin: int = 1_000
    burn_in_per_replicate: bool = True
    toy_edge_value: float = 0.4
    toy_confounder_value: float = 0.6
    toy_lag_value: float = 0.7

    def as_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def _toy_truth(options: ScenarioOptions) -> SimTruth:
    """
    Five observed nodes with six edges, one confounder linked to every node and a nilpotent
    transition matrix whose nonzeros all sit on non-edges.
    """
    p = 5
    offdiag = np.zeros((p + 1, p + 1))
    for j, k in TOY_EDGES:
        offdiag[j, k] = offdiag[k, j] = options.toy_edge_value
    offdiag[:p, p] = offdiag[p, :p] = options.toy_confounder_value
    theta = simgen.boost_diagonal(offdiag, 0.2)
    A = np.zeros((p, p))  # pylint: disable=invalid-name
    for j, k in TOY_CROSS_LAGS:
        A[j, k] = options.toy_lag_value
    return SimTruth(theta=theta, sigma=simgen.invert_pd(theta), p=p, A=A)


def build_scenario(
    name: str,
    n: int,
    T: int,  # pylint: disable=invalid-name
    p: int,
    seed: int = 0,
    options: ScenarioOptions = ScenarioOptions(),
) -> Tuple[ReplicateDataset, SimTruth]:
    """
    Generate one named scenario.

    The seed is split into independent streams for the graph, the transition matrix and the
    data, so the same seed always reproduces the same files.
    """
    if name not in SCENARIOS:
        raise UsageError(f"Unknown scenario '{name}' (expected one of {', '.join(SCENARIOS)})")
    graph_seed, transition_seed, data_seed = np.random.SeedSequence(seed).spawn(3)
    q = options.q
    logger.info("Building scenario %s with n=%d T=%d p=%d seed=%d", name, n, T, p, seed)

    if name == "toy":
        truth = _toy_truth(options)
        return simgen.gen_gaussian(n, T, truth, LatentSpec(q=1, regime="piecewise"), data_seed)

    if name == "ising":
        truth = simgen.ising_truth(simgen.gen_ising_precision(p, q, graph_seed), p)
        truth = truth.with_transition(simgen.gen_transition(TransitionSpec(kind="diagonal"), p))
        return simgen.gen_ising_gibbs(
            n,
            T,
            truth,
            LatentSpec(q=q, regime="piecewise"),
            burn_in=options.burn_in,
            thin=options.thin,
            seed=data_seed,
            burn_in_per_replicate=options.burn_in_per_replicate,
        )

    if name.startswith("ar1"):
        theta, sigma = simgen.gen_precision(PrecisionSpec(p=p, seed=graph_seed))
        truth = SimTruth(theta=theta, sigma=sigma, p=p, A=np.zeros((p, p)))
        latent = LatentSpec()
        kind = "diagonal" if name == "ar1-diagonal" else "sparse"
    else:
        truth = simgen.gen_partitioned(PrecisionSpec(p=p, seed=graph_seed), q)
        latent = LatentSpec(q=q, regime=name.split("-")[1])
        kind = "sparse" if name.startswith("combined") else "none"
    truth = truth.with_transition(simgen.gen_transition(TransitionSpec(kind=kind, seed=transition_seed), p))
    return simgen.gen_gaussian(n, T, truth, latent, data_seed)
