"""
Seeded data-generating mechanisms: sparse precision matrices (plain and partitioned into
observed and latent blocks), transition matrices, Gaussian one-lag autoregressions with
constant or piecewise-constant confounders, and an Ising Gibbs sampler.

All randomness flows from ``numpy.random.SeedSequence``; every subject draws from its own
spawned stream, so generated data do not depend on how subjects are scheduled.
"""

import logging
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import FrozenSet
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
from numba import njit
from scipy.linalg import LinAlgError
from scipy.linalg import cho_factor
from scipy.linalg import cho_solve
from scipy.linalg import cholesky
from scipy.linalg import eigvalsh
from scipy.linalg import solve

from repgraph.core.model import Edge
from repgraph.core.model import Family
from repgraph.core.model import ReplicateDataset
from repgraph.errors import DimensionError
from repgraph.errors import SimulationError

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]
Fill = Union[float, Tuple[float, float]]

REGIMES = ("none", "constant", "piecewise")
TRANSITIONS = ("none", "diagonal", "sparse")
ISING_SUPPORT = (0.25, 0.5)
FLOAT_FORMAT = "%.17g"


def round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def _seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


@dataclass(frozen=True)
class PrecisionSpec:
    """
    :param p: dimension.
    :param density: fraction of off-diagonal pairs set nonzero.
    :param fill: the nonzero value, or a (low, high) magnitude range drawn uniformly with a random sign.
    :param diag_boost: added to |lambda_min| of the off-diagonal part.
    :param seed: integer or SeedSequence.
    """

    p: int
    density: float = 0.1
    fill: Fill = 0.3
    diag_boost: float = 0.1
    seed: SeedLike = 0

    def __post_init__(self):
        if self.p < 2:
            raise DimensionError(f"A precision matrix needs p >= 2, got {self.p}")
        if not 0.0 <= self.density <= 1.0:
            raise SimulationError(f"density must lie in [0, 1], got {self.density}")
        if not self.diag_boost > 0.0:
            raise SimulationError(f"diag_boost must be positive, got {self.diag_boost}")


@dataclass(frozen=True)
class LatentSpec:
    """
    Confounder regime. ``changepoint`` is the last replicate (1-based) of the first segment;
    None means floor(T / 2).
    """

    q: int = 0
    regime: str = "none"
    changepoint: Optional[int] = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise SimulationError(f"Unknown latent regime '{self.regime}' (expected one of {', '.join(REGIMES)})")
        if self.regime != "none" and self.q < 1:
            raise SimulationError(f"The '{self.regime}' regime needs q >= 1 confounders")

    def resolve_changepoint(self, T: int) -> int:  # pylint: disable=invalid-name
        changepoint = T // 2 if self.changepoint is None else self.changepoint
        if self.regime == "piecewise" and not 1 < changepoint < T:
            raise SimulationError(f"Piecewise confounders need 1 < changepoint < T, got {changepoint} with T={T}")
        return changepoint


@dataclass(frozen=True)
class TransitionSpec:
    kind: str = "none"
    diag_value: float = 0.9
    sparse_density: float = 0.05
    sparse_value: float = 0.3
    seed: SeedLike = 0

    def __post_init__(self):
        if self.kind not in TRANSITIONS:
            raise SimulationError(f"Unknown transition kind '{self.kind}' (expected one of {', '.join(TRANSITIONS)})")
        if not (np.isfinite(self.diag_value) and np.isfinite(self.sparse_value)):
            raise SimulationError("Transition values must be finite")
        if not 0.0 <= self.sparse_density <= 1.0:
            raise SimulationError(f"sparse_density must lie in [0, 1], got {self.sparse_density}")


@dataclass(frozen=True, eq=False)
class SimTruth:
    """
    Ground truth of a simulated dataset.

    ``theta`` and ``sigma`` are (p+q) x (p+q) with the observed block first; ``A`` is the p x p
    transition matrix; ``latent`` holds the realized confounders with shape (n, T, q) once data
    have been generated.
    """

    theta: np.ndarray
    sigma: np.ndarray
    p: int
    A: np.ndarray  # pylint: disable=invalid-name
    latent: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def q(self) -> int:
        return self.theta.shape[0] - self.p

    @property
    def theta_xx(self) -> np.ndarray:
        return self.theta[: self.p, : self.p]

    @property
    def theta_xu(self) -> np.ndarray:
        return self.theta[: self.p, self.p :]

    @property
    def sigma_xx(self) -> np.ndarray:
        return self.sigma[: self.p, : self.p]

    @property
    def sigma_xu(self) -> np.ndarray:
        return self.sigma[: self.p, self.p :]

    @property
    def sigma_uu(self) -> np.ndarray:
        return self.sigma[self.p :, self.p :]

    @property
    def edges(self) -> FrozenSet[Edge]:
        """The graph: nonzero off-diagonal pattern of theta_xx."""
        rows, cols = np.nonzero(np.triu(self.theta_xx, k=1))
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def with_transition(self, A: np.ndarray) -> "SimTruth":  # pylint: disable=invalid-name
        A = np.asarray(A, dtype=float)  # pylint: disable=invalid-name
        if A.shape != (self.p, self.p):
            raise DimensionError(f"Transition matrix must be {self.p} x {self.p}, got {A.shape}")
        return replace(self, A=A)


def _fill_values(rng: np.random.Generator, count: int, fill: Fill) -> np.ndarray:
    if isinstance(fill, tuple):
        low, high = fill
        magnitudes = rng.uniform(low, high, size=count)
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return signs * magnitudes
    return np.full(count, float(fill))


def _choose(rng: np.random.Generator, total: int, density: float, label: str) -> np.ndarray:
    count = round_half_up(density * total)
    if count == 0 and density > 0.0:
        logger.warning("%s: density %g of %d candidates rounds to no nonzero entries", label, density, total)
    return rng.choice(total, size=count, replace=False)


def _symmetric_pattern(rng, size: int, density: float, fill: Fill, label: str) -> np.ndarray:
    matrix = np.zeros((size, size))
    rows, cols = np.triu_indices(size, k=1)
    chosen = _choose(rng, rows.shape[0], density, label)
    values = _fill_values(rng, chosen.shape[0], fill)
    matrix[rows[chosen], cols[chosen]] = values
    matrix[cols[chosen], rows[chosen]] = values
    return matrix


def boost_diagonal(offdiag: np.ndarray, diag_boost: float) -> np.ndarray:
    lambda_min = eigvalsh(offdiag)[0] if offdiag.shape[0] > 0 else 0.0
    theta = offdiag.copy()
    np.fill_diagonal(theta, abs(lambda_min) + diag_boost)
    return theta


def invert_pd(theta: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(theta, lower=True)
    except LinAlgError as exc:
        raise SimulationError("Precision matrix is not positive definite") from exc
    sigma = cho_solve(factor, np.eye(theta.shape[0]))
    return 0.5 * (sigma + sigma.T)


def gen_precision(spec: PrecisionSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sparse precision matrix with ``round(density * p(p-1)/2)`` nonzero pairs.

    :return: (Theta, Sigma = Theta^{-1}); lambda_min(Theta) >= diag_boost.
    """
    rng = np.random.default_rng(_seed_sequence(spec.seed))
    offdiag = _symmetric_pattern(rng, spec.p, spec.density, spec.fill, "precision")
    theta = boost_diagonal(offdiag, spec.diag_boost)
    return theta, invert_pd(theta)


def _partitioned_offdiag(rng, p: int, q: int, density: float, xu_density: float, uu_density: float, fill: Fill):
    offdiag = np.zeros((p + q, p + q))
    offdiag[:p, :p] = _symmetric_pattern(rng, p, density, fill, "observed block")
    chosen = _choose(rng, p * q, xu_density, "observed-latent block")
    block = np.zeros(p * q)
    block[chosen] = _fill_values(rng, chosen.shape[0], fill)
    offdiag[:p, p:] = block.reshape(p, q)
    offdiag[p:, :p] = offdiag[:p, p:].T
    offdiag[p:, p:] = _symmetric_pattern(rng, q, uu_density, fill, "latent block")
    return offdiag


def gen_partitioned(
    spec_x: PrecisionSpec,
    q: int,
    seed: Optional[SeedLike] = None,
    xu_density: float = 0.8,
    uu_density: float = 0.8,
    diag_boost: float = 0.2,
) -> SimTruth:
    """
    (p+q)-dimensional precision with an observed block of ``spec_x.density``, dense
    observed-latent and latent blocks, and diagonal |lambda_min| + ``diag_boost``.

    :param seed: overrides ``spec_x.seed`` when given.
    """
    if q < 1:
        raise DimensionError(f"A partitioned precision matrix needs q >= 1, got {q}")
    rng = np.random.default_rng(_seed_sequence(spec_x.seed if seed is None else seed))
    offdiag = _partitioned_offdiag(rng, spec_x.p, q, spec_x.density, xu_density, uu_density, spec_x.fill)
    theta = boost_diagonal(offdiag, diag_boost)
    return SimTruth(theta=theta, sigma=invert_pd(theta), p=spec_x.p, A=np.zeros((spec_x.p, spec_x.p)))


def gen_ising_precision(
    p: int,
    q: int,
    seed: SeedLike = 0,
    density: float = 0.1,
    xu_density: float = 0.8,
    uu_density: float = 0.8,
) -> np.ndarray:
    """
    Symmetric (p+q) x (p+q) Ising interaction matrix with the partitioned sparsity pattern and
    magnitudes uniform on [0.25, 0.5] with a random sign; the diagonal (node potentials) is zero.
    """
    if p < 2:
        raise DimensionError(f"An Ising model needs p >= 2, got {p}")
    rng = np.random.default_rng(_seed_sequence(seed))
    if q == 0:
        return _symmetric_pattern(rng, p, density, ISING_SUPPORT, "observed block")
    return _partitioned_offdiag(rng, p, q, density, xu_density, uu_density, ISING_SUPPORT)


def ising_truth(theta: np.ndarray, p: int, diag_boost: float = 0.2) -> SimTruth:
    """
    Wrap an Ising interaction matrix; the confounders' covariance is taken from the inverse of
    the interaction matrix with its diagonal boosted to positive definiteness.
    """
    theta = np.asarray(theta, dtype=float)
    offdiag = theta - np.diag(np.diag(theta))
    return SimTruth(theta=theta, sigma=invert_pd(boost_diagonal(offdiag, diag_boost)), p=p, A=np.zeros((p, p)))


def gen_transition(spec: TransitionSpec, p: int) -> np.ndarray:
    """diagonal: diag_value * I; sparse: round(sparse_density * p^2) entries equal to sparse_value; none: zeros."""
    if spec.kind == "diagonal":
        return spec.diag_value * np.eye(p)
    A = np.zeros(p * p)  # pylint: disable=invalid-name
    if spec.kind == "sparse":
        rng = np.random.default_rng(_seed_sequence(spec.seed))
        A[_choose(rng, p * p, spec.sparse_density, "transition")] = spec.sparse_value
    return A.reshape(p, p)


def _latent_path(
    rng: np.random.Generator, T: int, latent: LatentSpec, chol_uu, changepoint: int  # pylint: disable=invalid-name
):
    q = chol_uu.shape[0]
    path = np.zeros((T, q))
    if latent.regime == "constant":
        path[:] = chol_uu @ rng.standard_normal(q)
    elif latent.regime == "piecewise":
        first = chol_uu @ rng.standard_normal(q)
        second = chol_uu @ rng.standard_normal(q)
        path[:changepoint] = first
        path[changepoint:] = second
    return path


def _latent_factor(truth: SimTruth, latent: LatentSpec) -> np.ndarray:
    if latent.regime == "none":
        return np.zeros((0, 0))
    if latent.q != truth.q:
        raise DimensionError(f"Latent spec has q={latent.q} but the truth has q={truth.q} confounders")
    try:
        return cholesky(truth.sigma_uu, lower=True)
    except LinAlgError as exc:
        raise SimulationError("Confounder covariance is not positive definite") from exc


def gen_gaussian(
    n: int, T: int, truth: SimTruth, latent: LatentSpec, seed: SeedLike = 0  # pylint: disable=invalid-name
) -> Tuple[ReplicateDataset, SimTruth]:
    """
    Gaussian replicates: X_i1 | U ~ N(B U_i1, S) and X_it | X_i(t-1), U ~ N(A X_i(t-1) + B U_it, S)
    with B = Sigma_XU Sigma_UU^{-1} and S = Sigma_XX - B Sigma_UX (B = 0 and S = Sigma_XX without
    confounders).

    :return: the (uncentered) dataset and the truth carrying the realized confounders.
    """
    if n < 1 or T < 1:
        raise DimensionError(f"Need n >= 1 and T >= 1, got n={n}, T={T}")
    p = truth.p
    changepoint = latent.resolve_changepoint(T)
    chol_uu = _latent_factor(truth, latent)
    if latent.regime == "none":
        loading = np.zeros((p, 0))
        conditional = truth.sigma_xx
    else:
        loading = solve(truth.sigma_uu, truth.sigma_xu.T, assume_a="pos").T
        conditional = truth.sigma_xx - loading @ truth.sigma_xu.T
    try:
        chol_x = cholesky(0.5 * (conditional + conditional.T), lower=True)
    except LinAlgError as exc:
        raise SimulationError("Conditional covariance of the observed variables is not positive definite") from exc

    values = np.zeros((n, T, p))
    realized = np.zeros((n, T, chol_uu.shape[0]))
    for i, child in enumerate(_seed_sequence(seed).spawn(n)):
        rng = np.random.default_rng(child)
        realized[i] = _latent_path(rng, T, latent, chol_uu, changepoint)
        noise = rng.standard_normal((T, p)) @ chol_x.T
        shift = realized[i] @ loading.T
        values[i, 0] = shift[0] + noise[0]
        for t in range(1, T):
            values[i, t] = truth.A @ values[i, t - 1] + shift[t] + noise[t]
    logger.debug("Generated Gaussian data n=%d T=%d p=%d regime=%s", n, T, p, latent.regime)
    dataset = ReplicateDataset(values=values, family=Family.GAUSSIAN)
    return dataset, replace(truth, latent=realized if latent.regime != "none" else None)


@njit(cache=True, nogil=True)
def gibbs_sweeps(state, coupling, external, uniforms):
    """
    Systematic-scan Gibbs sweeps j = 1..p over binary ``state`` (modified in place).

    Node j switches on when ``uniforms[s, j] < sigmoid(coupling[j, j] + external[j]
    + sum_{k != j} coupling[j, k] state[k])``.
    """
    p = state.shape[0]
    for sweep in range(uniforms.shape[0]):
        for j in range(p):
            field_j = coupling[j, j] + external[j]
            for k in range(p):
                if k != j:
                    field_j += coupling[j, k] * state[k]
            probability = 1.0 / (1.0 + np.exp(-field_j))
            state[j] = 1.0 if uniforms[sweep, j] < probability else 0.0
    return state


def gen_ising_gibbs(
    n: int,
    T: int,  # pylint: disable=invalid-name
    truth: SimTruth,
    latent: LatentSpec,
    burn_in: int = 10_000,
    thin: int = 1_000,
    seed: SeedLike = 0,
    burn_in_per_replicate: bool = True,
) -> Tuple[ReplicateDataset, SimTruth]:
    """
    Binary replicates from a Gibbs sampler.

    The first replicate of a subject is collected after ``burn_in + thin`` sweeps of the
    conditional without lag; replicate t >= 2 continues the chain under the conditional with
    the extra field ``A x_{t-1}`` for another ``thin`` sweeps (plus ``burn_in`` when
    ``burn_in_per_replicate``).
    """
    if burn_in < 0 or thin < 1:
        raise SimulationError(f"Need burn_in >= 0 and thin >= 1, got burn_in={burn_in}, thin={thin}")
    if not np.all(np.isfinite(truth.theta)):
        raise SimulationError("Ising interactions must be finite")
    p = truth.p
    changepoint = latent.resolve_changepoint(T)
    chol_uu = _latent_factor(truth, latent)
    coupling = np.ascontiguousarray(truth.theta_xx)
    loading = truth.theta_xu if latent.regime != "none" else np.zeros((p, 0))

    values = np.zeros((n, T, p))
    realized = np.zeros((n, T, chol_uu.shape[0]))
    for i, child in enumerate(_seed_sequence(seed).spawn(n)):
        rng = np.random.default_rng(child)
        realized[i] = _latent_path(rng, T, latent, chol_uu, changepoint)
        state = rng.integers(0, 2, size=p).astype(float)
        for t in range(T):
            external = loading @ realized[i, t]
            sweeps = thin + (burn_in if t == 0 or burn_in_per_replicate else 0)
            if t > 0:
                external = external + truth.A @ values[i, t - 1]
            gibbs_sweeps(state, coupling, np.ascontiguousarray(external), rng.random((sweeps, p)))
            values[i, t] = state
    logger.debug("Generated Ising data n=%d T=%d p=%d regime=%s", n, T, p, latent.regime)
    dataset = ReplicateDataset(values=values, family=Family.ISING)
    return dataset, replace(truth, latent=realized if latent.regime != "none" else None)


def write_matrix_csv(matrix: np.ndarray, path: str) -> str:
    """Dense, header-free matrix CSV (used for precision and transition matrices)."""
    pd.DataFrame(np.asarray(matrix, dtype=float)).to_csv(
        path, index=False, header=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return path


def read_matrix_csv(path: str) -> np.ndarray:
    return pd.read_csv(path, header=None, float_precision="round_trip").to_numpy(dtype=float)


def write_latent_csv(latent: np.ndarray, path: str) -> str:
    """Realized confounders in long format ``subject,time,u1..uq``."""
    n, T, q = latent.shape  # pylint: disable=invalid-name
    frame = pd.DataFrame(latent.reshape(n * T, q), columns=[f"u{m}" for m in range(1, q + 1)])
    frame.insert(0, "time", np.tile(np.arange(1, T + 1), n))
    frame.insert(0, "subject", np.repeat(np.arange(1, n + 1), T))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path
