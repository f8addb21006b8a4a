"""
Log-partition calculus of the node-conditional families.

For a node with linear predictor eta the negative log-likelihood of an observation x is
``D(eta) - x * eta`` up to terms free of eta; ``D'`` is the conditional mean and
``curvature_bound`` is sup ``D''`` on the admissible predictor range and ``lipschitz_L``
the default majorization constant, never below it.
"""

import math
from dataclasses import dataclass
from typing import Callable
from typing import Optional

import numpy as np
from scipy.special import expit

from repgraph.core.model import Family

DEFAULT_POISSON_ETA_CAP = 6.0

ArrayFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NodeFamily:
    """
    :param name: the family.
    :param log_partition: eta -> D(eta), vectorized.
    :param mean: eta -> D'(eta), vectorized.
    :param variance: eta -> D''(eta), vectorized.
    :param lipschitz_L: default majorization constant.
    :param curvature_bound: sup D'' on the admissible range; every usable constant is at least this.
    :param eta_cap: admissible upper bound for eta, None when unbounded.
    """

    name: Family
    log_partition: ArrayFunction
    mean: ArrayFunction
    variance: ArrayFunction
    lipschitz_L: float  # pylint: disable=invalid-name
    curvature_bound: float
    eta_cap: Optional[float] = None

    def loss(self, x: np.ndarray, eta: np.ndarray) -> float:
        """Average negative log-likelihood ``mean(D(eta) - x * eta)``."""
        return float(np.mean(self.log_partition(eta) - x * eta))


def _gaussian_log_partition(eta):
    return 0.5 * np.square(eta) + 0.5 * math.log(2.0 * math.pi)


def _ising_variance(eta):
    prob = expit(eta)
    return prob * (1.0 - prob)


def family_gaussian() -> NodeFamily:
    return NodeFamily(
        name=Family.GAUSSIAN,
        log_partition=_gaussian_log_partition,
        mean=lambda eta: np.asarray(eta, dtype=float),
        variance=lambda eta: np.ones_like(np.asarray(eta, dtype=float)),
        lipschitz_L=1.0,
        curvature_bound=1.0,
    )


def family_ising(lipschitz_L: float = 1.0) -> NodeFamily:  # pylint: disable=invalid-name
    """
    Binary node conditionals, ``D(eta) = log(1 + e^eta)``.

    The default constant 1 is the customary choice; sup D'' is 1/4, so any value from 0.25 up majorizes.
    """
    return NodeFamily(
        name=Family.ISING,
        log_partition=lambda eta: np.logaddexp(0.0, eta),
        mean=expit,
        variance=_ising_variance,
        lipschitz_L=lipschitz_L,
        curvature_bound=0.25,
    )


def family_poisson(eta_cap: float = DEFAULT_POISSON_ETA_CAP) -> NodeFamily:
    """
    Count node conditionals, ``D(eta) = exp(eta)``.

    D'' is unbounded, so the admissible predictor range is capped and L = exp(cap).
    """
    return NodeFamily(
        name=Family.POISSON,
        log_partition=np.exp,
        mean=np.exp,
        variance=np.exp,
        lipschitz_L=math.exp(eta_cap),
        curvature_bound=math.exp(eta_cap),
        eta_cap=eta_cap,
    )


def family_for(family: Family, **kwargs) -> NodeFamily:
    """Default NodeFamily for a dataset family."""
    builders = {
        Family.GAUSSIAN: family_gaussian,
        Family.ISING: family_ising,
        Family.POISSON: family_poisson,
    }
    return builders[Family.parse(family)](**kwargs)
