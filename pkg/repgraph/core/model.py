"""
Domain types shared by every module: datasets, penalty configurations, node fits
and graph estimates, together with the two dataset operations the solvers build on.

Indices are 0-based in the Python API (subject ``i``, replicate ``t``, variable ``j``);
files use 1-based indices. Every length-nT vector is flattened subject-major,
time-minor: ``(x_11, ..., x_1T, x_21, ..., x_nT)``.
"""

import logging
import math
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import Enum
from typing import Dict
from typing import FrozenSet
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from repgraph.errors import DatasetError
from repgraph.errors import DimensionError
from repgraph.errors import FamilyMismatchError

logger = logging.getLogger(__name__)

CENTERING_TOLERANCE = 1e-10


class Family(str, Enum):
    """Node-conditional exponential families."""

    GAUSSIAN = "gaussian"
    ISING = "ising"
    POISSON = "poisson"

    @classmethod
    def parse(cls, name: Union[str, "Family"]) -> "Family":
        """Accept a member or its string value."""
        try:
            return cls(name)
        except ValueError as exc:
            choices = ", ".join(member.value for member in cls)
            raise FamilyMismatchError(f"Unknown family '{name}' (expected one of {choices})") from exc


class Rule(str, Enum):
    """Symmetrization rules for neighborhood estimates."""

    INTERSECTION = "intersection"
    UNION = "union"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class ReplicateDataset:
    """
    n subjects x T replicates x p variables.

    :param values: array of shape (n, T, p).
    :param family: node-conditional family of every variable.
    :param centered: True once the per-variable pooled mean has been removed (Gaussian only).
    """

    values: np.ndarray
    family: Family = Family.GAUSSIAN
    centered: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise DimensionError(f"Dataset values must be a 3-d array (n, T, p), got shape {values.shape}")
        if min(values.shape) < 1:
            raise DimensionError(f"Dataset must be non-empty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DatasetError("Dataset contains missing or non-finite values")
        family = Family.parse(self.family)
        if family is Family.ISING and not np.all((values == 0.0) | (values == 1.0)):
            raise DatasetError("Ising datasets must only contain the values 0 and 1")
        if family is Family.POISSON and not np.all((values >= 0.0) & (values == np.floor(values))):
            raise DatasetError("Poisson datasets must only contain nonnegative integers")
        if self.centered:
            if family is not Family.GAUSSIAN:
                raise FamilyMismatchError("Only Gaussian datasets can be centered")
            means = values.reshape(-1, values.shape[2]).mean(axis=0)
            if np.max(np.abs(means)) >= CENTERING_TOLERANCE:
                raise DatasetError("Dataset flagged as centered but a pooled mean exceeds 1e-10")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "family", family)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:  # pylint: disable=invalid-name
        return self.values.shape[1]

    @property
    def p(self) -> int:
        return self.values.shape[2]

    def stacked(self) -> np.ndarray:
        """All observations as an (nT, p) matrix in subject-major order."""
        return self.values.reshape(self.n * self.T, self.p)

    def node_response(self, j: int) -> np.ndarray:
        """x_j: the nT observations of variable j."""
        self._check_node(j)
        return np.ascontiguousarray(self.values[:, :, j].reshape(-1))

    def subset(self, subjects: Sequence[int]) -> "ReplicateDataset":
        """A dataset restricted to the given subjects (the centering flag is re-derived)."""
        values = self.values[np.asarray(subjects, dtype=int)]
        return ReplicateDataset(values=values, family=self.family, centered=False)

    def _check_node(self, j: int):
        if not 0 <= j < self.p:
            raise DimensionError(f"Node index {j} outside 0..{self.p - 1}")


@dataclass(frozen=True)
class PenaltyConfig:
    """
    Tuning parameters of one fit plus the baseline switches.

    ``drop_alpha`` removes the lag block from the problem, ``drop_delta`` the latent block;
    both are independent of the penalty values.
    """

    lam: float
    beta: float = 0.0
    gamma: float = 0.0
    drop_alpha: bool = False
    drop_delta: bool = False

    def __post_init__(self):
        for name in ("lam", "beta", "gamma"):
            value = float(getattr(self, name))
            if math.isnan(value) or value < 0.0:
                raise DimensionError(f"Penalty '{name}' must be a nonnegative number, got {value}")
            object.__setattr__(self, name, value)

    def with_lambda(self, lam: float) -> "PenaltyConfig":
        return replace(self, lam=lam)

    def as_dict(self) -> Dict[str, object]:
        return {
            "lambda": self.lam,
            "beta": self.beta,
            "gamma": self.gamma,
            "drop_alpha": self.drop_alpha,
            "drop_delta": self.drop_delta,
        }


@dataclass(frozen=True, eq=False)
class NodeFit:
    """
    Estimates for one node problem.

    ``theta`` has length p-1 (node j removed), ``alpha`` length p, ``delta`` and ``h`` length nT.
    ``min_change_iteration`` is the first outer iteration at which the smallest of the three
    block changes fell below the tolerance; it is reported, not used for stopping.
    """

    j: int
    theta: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    h: np.ndarray
    iterations: int
    final_objective: float
    converged: bool
    min_change_iteration: Optional[int] = None
    intercept: float = 0.0
    objective_trace: Tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        for name in ("theta", "alpha", "delta", "h"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    def theta_full(self) -> np.ndarray:
        """theta expanded to length p with a zero at position j."""
        return np.insert(np.asarray(self.theta), self.j, 0.0)

    def coefficient(self, k: int) -> float:
        """theta_jk for k != j."""
        if k == self.j:
            raise DimensionError("theta_jj is not estimated")
        return float(self.theta[k if k < self.j else k - 1])


Edge = Tuple[int, int]


@dataclass(frozen=True)
class GraphEstimate:
    """Symmetric edge set over p nodes; ``coefficients[(j, k)] = (theta_jk, theta_kj)``."""

    p: int
    edges: FrozenSet[Edge]
    rule: Rule
    coefficients: Dict[Edge, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for j, k in self.edges:
            if not 0 <= j < k < self.p:
                raise DimensionError(f"Edge ({j}, {k}) must satisfy 0 <= j < k < p={self.p}")
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "rule", Rule(self.rule))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def sorted_edges(self):
        return sorted(self.edges)


def center_dataset(d: ReplicateDataset) -> ReplicateDataset:
    """
    Subtract the per-variable pooled mean (over all subjects and replicates).

    :param d: a Gaussian dataset.
    :return: the centered dataset with ``centered=True``.
    """
    if d.family is not Family.GAUSSIAN:
        raise FamilyMismatchError(f"Centering applies to Gaussian data only, not '{d.family.value}'")
    values = d.values - d.stacked().mean(axis=0)[np.newaxis, np.newaxis, :]
    # second pass removes the rounding left by large offsets
    values = values - values.reshape(-1, d.p).mean(axis=0)[np.newaxis, np.newaxis, :]
    return ReplicateDataset(values=values, family=d.family, centered=True)


def lag_design(d: ReplicateDataset, i: int) -> np.ndarray:
    """
    T x p lag predictors of subject i: row t holds the observation at replicate t-1,
    row 0 is the zero vector (the replicate before the first one is unobserved).
    """
    if not 0 <= i < d.n:
        raise DimensionError(f"Subject index {i} outside 0..{d.n - 1}")
    lagged = np.zeros((d.T, d.p))
    lagged[1:] = d.values[i, :-1, :]
    return lagged


def lag_stack(d: ReplicateDataset) -> np.ndarray:
    """The (nT, p) lag design of all subjects, stacked subject-major."""
    lagged = np.zeros_like(d.values)
    lagged[:, 1:, :] = d.values[:, :-1, :]
    return lagged.reshape(d.n * d.T, d.p)


def others_stack(d: ReplicateDataset, j: int) -> np.ndarray:
    """The (nT, p-1) design of every variable except j."""
    d._check_node(j)  # pylint: disable=protected-access
    return np.delete(d.stacked(), j, axis=1)
