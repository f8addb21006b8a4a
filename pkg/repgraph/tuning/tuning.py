"""
Tuning-parameter selection.

Two routes are offered: closed-form reference values from the estimator's error bounds
(``theory_defaults``), and the estimation-stability selector (``es_select``) that refits on
leave-one-fifth-out subject subsets and prefers the configuration whose fitted linear
predictors vary least.
"""

import json
import logging
import math
from dataclasses import dataclass
from dataclasses import field
from typing import Dict
from typing import Iterable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence

import numpy as np

from repgraph.core.families import NodeFamily
from repgraph.core.families import family_for
from repgraph.core.model import NodeFit
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.core.model import lag_stack
from repgraph.errors import DimensionError
from repgraph.errors import UsageError
from repgraph.graphs.graph_assembly import SolverSettings
from repgraph.graphs.graph_assembly import fit_graph
from repgraph.graphs.graph_assembly import prepare_dataset
from repgraph.solvers import fused_basis
from repgraph.solvers.glm_solver import GgdSettings
from repgraph.solvers.glm_solver import refit_delta

logger = logging.getLogger(__name__)

THEORY_MODES = ("generic", "pinned")
EVALUATE_ON = ("full", "subset")


@dataclass(frozen=True)
class TheoryInputs:
    """
    :param sigma_m: noise scale constant.
    :param delta_max: largest jump size constant of the latent effect.
    :param tau_knots: largest number of jumps per subject.
    :param c1_const: the unspecified generic constant of the gamma formula.
    """

    n: int
    T: int  # pylint: disable=invalid-name
    p: int
    sigma_m: float = 1.0
    delta_max: float = 1.0
    tau_knots: int = 1
    c1_const: float = 1.0

    def __post_init__(self):
        if min(self.n, self.T, self.p) < 2:
            raise DimensionError("Theory defaults need n, T, p >= 2")
        if min(self.sigma_m, self.delta_max, self.tau_knots, self.c1_const) <= 0:
            raise DimensionError("sigma_m, delta_max, tau_knots and c1_const must be positive")


class TheoryValues(NamedTuple):
    branch: str
    c4: float
    i0: int
    lam: float
    gamma: float


def theory_values(inp: TheoryInputs, mode: str = "generic", no_confounders: bool = False) -> TheoryValues:
    """
    Evaluate the reference formulas (natural logarithms).

    ``branch`` is "many-replicates" when T > c4^2 n, "few-replicates" otherwise, and
    "no-confounders" for data without confounders. In "pinned" mode gamma = 2 sigma_m D / (nT) with
    D = 8 sqrt(T log T / (pi^2 i0)) instead of the generic-constant formula.
    """
    if mode not in THEORY_MODES:
        raise UsageError(f"Unknown theory mode '{mode}' (expected one of {', '.join(THEORY_MODES)})")
    n, T, p = inp.n, inp.T, inp.p  # pylint: disable=invalid-name
    log_t = math.log(T)
    scale = 2.0 * log_t * math.log(n * T * p)
    c4 = (4.0 * log_t * inp.delta_max**2 * inp.tau_knots**2 / math.pi**2) ** 0.25
    if no_confounders:
        branch = "no-confounders"
        lam = scale * n ** (-0.5) * T ** (-0.5)
        i0 = max(1, math.floor(log_t))
    elif T > c4**2 * n:
        branch = "many-replicates"
        lam = scale * n ** (-1.0 / 6.0) * T ** (-1.0 / 3.0)
        i0 = max(1, math.floor((c4 * T**0.25 * n**0.5) ** (4.0 / 3.0)))
    else:
        branch = "few-replicates"
        lam = scale * T ** (-0.5)
        i0 = T - 1
    if mode == "pinned":
        big_d = 8.0 * math.sqrt(T * log_t / (math.pi**2 * i0))
        gamma = 2.0 * inp.sigma_m * big_d / (n * T)
    else:
        gamma = inp.c1_const * inp.sigma_m * math.sqrt(log_t / i0) / n / math.sqrt(T)
    return TheoryValues(branch=branch, c4=c4, i0=i0, lam=lam, gamma=gamma)


def theory_defaults(inp: TheoryInputs, mode: str = "generic", no_confounders: bool = False) -> PenaltyConfig:
    """Reference configuration with lambda = beta from :func:`theory_values`."""
    values = theory_values(inp, mode, no_confounders)
    logger.info("Theory defaults (%s): lambda=beta=%.6g gamma=%.6g", values.branch, values.lam, values.gamma)
    return PenaltyConfig(lam=values.lam, beta=values.lam, gamma=values.gamma)


def log_grid(low: float, high: float, count: int) -> List[float]:
    """``count`` log-spaced values from high down to low."""
    if not 0.0 < low <= high or count < 1:
        raise UsageError(f"Invalid log grid low={low} high={high} count={count}")
    if count == 1:
        return [float(high)]
    return [float(value) for value in np.geomspace(high, low, count)]


def tied_grid(lambdas: Iterable[float], gammas: Iterable[float]) -> List[PenaltyConfig]:
    """Configurations with beta = lambda, lambdas descending within each gamma."""
    ordered = sorted((float(lam) for lam in lambdas), reverse=True)
    return [PenaltyConfig(lam=lam, beta=lam, gamma=float(gamma)) for gamma in gammas for lam in ordered]


def lambda_grid(lambdas: Iterable[float], base: PenaltyConfig, tie_beta: bool = False) -> List[PenaltyConfig]:
    """``base`` with lambda replaced by each value (and beta too when ``tie_beta``), in the given order."""
    grid = []
    for lam in lambdas:
        cfg = base.with_lambda(float(lam))
        grid.append(PenaltyConfig(cfg.lam, cfg.lam, cfg.gamma, cfg.drop_alpha, cfg.drop_delta) if tie_beta else cfg)
    return grid


@dataclass(frozen=True, eq=False)
class EsResult:
    """
    ES values of every grid configuration.

    ``node_es[c][j]`` is ES_j of configuration c; ``predictors[c]`` has shape
    (folds, p, nT) and holds the fitted linear predictors (NaN where a fold does not
    evaluate a row); ``folds[l]`` lists the 0-based subjects held out of subset l.
    """

    grid: List[PenaltyConfig]
    es: List[float]
    node_es: List[np.ndarray]
    selected_index: int
    folds: List[np.ndarray]
    evaluate_on: str = "full"
    predictors: List[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def selected(self) -> PenaltyConfig:
        return self.grid[self.selected_index]


def fold_assignment(n: int, folds: int, seed: int) -> List[np.ndarray]:
    """Disjoint, sorted subject groups from a seeded shuffle."""
    if folds < 2 or n < folds:
        raise DimensionError(f"ES selection needs 2 <= folds <= n, got folds={folds}, n={n}")
    permutation = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(permutation, folds)]


def estimation_stability(predictors: np.ndarray, covered: Optional[np.ndarray] = None) -> np.ndarray:
    """
    ES_j for every node from fold predictors of shape (folds, p, nT).

    :param covered: optional boolean mask (folds, nT) of the rows each fold evaluates; the
        mean predictor of a row averages the folds covering it and its spread is divided by
        the same coverage count.
    :return: length-p array; +inf where the mean predictor is identically zero.
    """
    folds = predictors.shape[0]
    if covered is None:
        covered = np.ones((folds, predictors.shape[2]), dtype=bool)
    weights = covered[:, np.newaxis, :].astype(float)
    filled = np.where(weights > 0.0, predictors, 0.0)
    counts = np.maximum(weights.sum(axis=0), 1.0)
    mean = filled.sum(axis=0) / counts
    spread = ((weights * (filled - mean[np.newaxis]) ** 2).sum(axis=0) / counts).sum(axis=1)
    norm = (mean**2).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(norm > 0.0, spread / np.where(norm > 0.0, norm, 1.0), np.inf)


def _fold_predictors(
    full: ReplicateDataset,
    held_out: np.ndarray,
    fits: Sequence[NodeFit],
    family: NodeFamily,
    cfg: PenaltyConfig,
    settings: Optional[SolverSettings],
    evaluate_on: str,
) -> np.ndarray:
    """(p, nT) linear predictors of one fold's fits on the full data (NaN on rows it does not evaluate)."""
    n, T, p = full.n, full.T, full.p  # pylint: disable=invalid-name
    kept = np.setdiff1d(np.arange(n), held_out)
    stacked = full.values
    lags = lag_stack(full).reshape(n, T, p)
    held_data = ReplicateDataset(values=full.values[held_out], family=full.family) if held_out.size else None
    held_basis = fused_basis.build(held_out.size, T) if held_out.size and T >= 2 else None
    refit_settings = settings if isinstance(settings, GgdSettings) else None
    predictors = np.full((p, n, T), np.nan)
    for fit in fits:
        j = fit.j
        others = np.delete(stacked, j, axis=2)
        eta = others @ fit.theta + lags @ fit.alpha + fit.intercept
        delta = np.zeros((n, T))
        delta[kept] = fit.delta.reshape(kept.size, T)
        if evaluate_on == "full" and held_data is not None:
            if held_basis is not None:
                delta[held_out] = refit_delta(
                    held_data, j, family, fit.theta, fit.alpha, cfg, held_basis, refit_settings, fit.intercept
                ).reshape(held_out.size, T)
            rows = np.arange(n)
        else:
            rows = kept
        predictors[j, rows] = eta[rows] + delta[rows]
    return predictors.reshape(p, n * T)


def select_index(es_values: Sequence[float], grid: Sequence[PenaltyConfig]) -> int:
    """Smallest ES wins; ties go to the smallest (lambda, gamma, beta), then to the earlier entry."""
    return min(range(len(grid)), key=lambda idx: (es_values[idx], grid[idx].lam, grid[idx].gamma, grid[idx].beta))


def es_select(
    d: ReplicateDataset,
    grid: Sequence[PenaltyConfig],
    family: Optional[NodeFamily] = None,
    folds: int = 5,
    seed: int = 0,
    settings: Optional[SolverSettings] = None,
    threads: int = 1,
    evaluate_on: str = "full",
) -> EsResult:
    """
    Pick the configuration with the smallest estimation stability.

    For every configuration and fold l the nodes are refitted on the subjects outside fifth l;
    the fitted linear predictors are evaluated on the full data (held-out subjects get their
    latent effect re-estimated with theta and alpha frozen) or, with ``evaluate_on="subset"``,
    only on the subjects the fold was fitted on. Ties go to the smallest (lambda, gamma, beta).
    """
    if not grid:
        raise DimensionError("es_select needs a non-empty grid")
    if evaluate_on not in EVALUATE_ON:
        raise UsageError(f"evaluate_on must be one of {', '.join(EVALUATE_ON)}, got '{evaluate_on}'")
    full = prepare_dataset(d)
    family = family or family_for(full.family)
    held_out_groups = fold_assignment(full.n, folds, seed)
    covered = None
    if evaluate_on == "subset":
        covered = np.ones((folds, full.n, full.T), dtype=bool)
        for fold, held_out in enumerate(held_out_groups):
            covered[fold, held_out] = False
        covered = covered.reshape(folds, full.n * full.T)

    es_values: List[float] = []
    node_es: List[np.ndarray] = []
    all_predictors: List[np.ndarray] = []
    for index, cfg in enumerate(grid):
        fold_predictors = []
        for held_out in held_out_groups:
            kept = np.setdiff1d(np.arange(full.n), held_out)
            subset = ReplicateDataset(values=full.values[kept], family=full.family)
            fits = fit_graph(subset, cfg, family, None, settings, threads)
            fold_predictors.append(_fold_predictors(full, held_out, fits, family, cfg, settings, evaluate_on))
        predictors = np.stack(fold_predictors)
        per_node = estimation_stability(predictors, covered)
        es_values.append(float(np.mean(per_node)) if np.all(np.isfinite(per_node)) else math.inf)
        node_es.append(per_node)
        all_predictors.append(predictors)
        if not np.all(np.isfinite(per_node)):
            zero_nodes = np.flatnonzero(~np.isfinite(per_node)).tolist()
            logger.warning("Config %d: nodes %s have an all-zero mean predictor", index, zero_nodes)
        logger.info("ES of lambda=%g beta=%g gamma=%g: %.6g", cfg.lam, cfg.beta, cfg.gamma, es_values[-1])

    selected = select_index(es_values, grid)
    return EsResult(
        grid=list(grid),
        es=es_values,
        node_es=node_es,
        selected_index=selected,
        folds=held_out_groups,
        evaluate_on=evaluate_on,
        predictors=all_predictors,
    )


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def es_report(result: EsResult) -> Dict[str, object]:
    """JSON-ready report; infinite ES values are written as null, subjects are 1-based."""
    return {
        "grid": [cfg.as_dict() for cfg in result.grid],
        "es": [_finite_or_none(value) for value in result.es],
        "node_es": [[_finite_or_none(value) for value in values] for values in result.node_es],
        "selected_index": result.selected_index,
        "selected": result.selected.as_dict(),
        "folds": [[int(subject) + 1 for subject in held_out] for held_out in result.folds],
        "evaluate_on": result.evaluate_on,
    }


def write_es_report(result: EsResult, path: str) -> str:
    with open(path, "w", encoding="utf-8") as report_file:
        json.dump(es_report(result), report_file, indent=2)
        report_file.write("\n")
    return path
