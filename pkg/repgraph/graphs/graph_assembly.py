"""
From node fits to graphs: concurrent per-node fitting, intersection/union symmetrization,
edge counts along a tuning path, edge-count targeting and the graph/coefficient files.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict
from typing import FrozenSet
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd

from repgraph.core.families import NodeFamily
from repgraph.core.families import family_for
from repgraph.core.model import Edge
from repgraph.core.model import Family
from repgraph.core.model import GraphEstimate
from repgraph.core.model import NodeFit
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.core.model import Rule
from repgraph.core.model import center_dataset
from repgraph.errors import DatasetError
from repgraph.errors import DimensionError
from repgraph.solvers import fused_basis
from repgraph.solvers.fused_basis import FusedBasis
from repgraph.solvers.gaussian_solver import BcdSettings
from repgraph.solvers.gaussian_solver import fit_node_gaussian
from repgraph.solvers.glm_solver import GgdSettings
from repgraph.solvers.glm_solver import fit_node_glm

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MAX_WIDENINGS = 20

SolverSettings = Union[BcdSettings, GgdSettings]


def prepare_dataset(d: ReplicateDataset) -> ReplicateDataset:
    """Gaussian data is fitted centered; other families are used as given."""
    if d.family is Family.GAUSSIAN and not d.centered:
        logger.debug("Centering Gaussian dataset before fitting")
        return center_dataset(d)
    return d


def fit_node(
    d: ReplicateDataset,
    j: int,
    cfg: PenaltyConfig,
    basis: FusedBasis,
    family: Optional[NodeFamily] = None,
    settings: Optional[SolverSettings] = None,
    warm_start: Optional[NodeFit] = None,
) -> NodeFit:
    """
    Fit one node with the solver matching the family: block coordinate descent for Gaussian
    data (unless GgdSettings are given), generalized gradient descent otherwise.
    """
    family = family or family_for(d.family)
    if family.name is Family.GAUSSIAN and not isinstance(settings, GgdSettings):
        return fit_node_gaussian(d, j, cfg, basis, settings, warm_start)
    if isinstance(settings, BcdSettings):
        settings = GgdSettings(
            tol=settings.tol,
            max_outer=settings.max_outer,
            inner_tol=settings.inner_tol,
            inner_max_sweeps=settings.inner_max_sweeps,
            h_update=settings.h_update,
        )
    return fit_node_glm(d, j, family, cfg, basis, settings, warm_start)


def fit_graph(
    d: ReplicateDataset,
    cfg: PenaltyConfig,
    family: Optional[NodeFamily] = None,
    basis: Optional[FusedBasis] = None,
    settings: Optional[SolverSettings] = None,
    threads: int = 1,
    warm_start: Optional[Sequence[NodeFit]] = None,
) -> List[NodeFit]:
    """
    Fit all p node problems, ``threads`` at a time.

    :param warm_start: fits of a previous configuration, one per node.
    :return: the fits in node order, independent of the thread count.
    """
    d = prepare_dataset(d)
    basis = basis or fused_basis.build(d.n, d.T)
    if warm_start is not None and len(warm_start) != d.p:
        raise DimensionError(f"Warm start has {len(warm_start)} fits for p={d.p} nodes")

    def _fit(j: int) -> NodeFit:
        return fit_node(d, j, cfg, basis, family, settings, warm_start[j] if warm_start is not None else None)

    if threads <= 1:
        return [_fit(j) for j in range(d.p)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(_fit, range(d.p)))


def symmetrize(
    fits: Sequence[NodeFit], rule: Union[str, Rule] = Rule.INTERSECTION, zero_tol: float = 0.0
) -> GraphEstimate:
    """
    Combine neighborhood estimates into an undirected graph.

    Edge (j, k) is kept when |theta_jk| and |theta_kj| both exceed ``zero_tol`` (intersection)
    or when either does (union).
    """
    rule = Rule(rule)
    if not fits:
        raise DimensionError("symmetrize needs one fit per node")
    by_node = {fit.j: fit for fit in fits}
    p = fits[0].p
    if sorted(by_node) != list(range(p)) or len(fits) != p:
        missing = sorted(set(range(p)) - set(by_node))
        raise DimensionError(f"Missing node fits for nodes {missing}" if missing else "Duplicate node fits")
    edges = set()
    coefficients: Dict[Edge, Tuple[float, float]] = {}
    for j in range(p):
        for k in range(j + 1, p):
            forward = by_node[j].coefficient(k)
            backward = by_node[k].coefficient(j)
            present = (abs(forward) > zero_tol, abs(backward) > zero_tol)
            if all(present) if rule is Rule.INTERSECTION else any(present):
                edges.add((j, k))
                coefficients[(j, k)] = (forward, backward)
    return GraphEstimate(p=p, edges=frozenset(edges), rule=rule, coefficients=coefficients)


class PathPoint(NamedTuple):
    config: PenaltyConfig
    edge_count: int
    graph: GraphEstimate


def edge_count_path(
    d: ReplicateDataset,
    grid: Sequence[PenaltyConfig],
    rule: Union[str, Rule] = Rule.INTERSECTION,
    family: Optional[NodeFamily] = None,
    basis: Optional[FusedBasis] = None,
    settings: Optional[SolverSettings] = None,
    threads: int = 1,
    warm_starts: bool = True,
) -> List[PathPoint]:
    """
    Symmetrized edge counts along a grid of configurations.

    With ``warm_starts`` the grid is visited by descending lambda, each configuration starting
    from the previous fits; the result is always reported in the caller's grid order.
    """
    if not grid:
        raise DimensionError("edge_count_path needs a non-empty grid")
    d = prepare_dataset(d)
    basis = basis or fused_basis.build(d.n, d.T)
    order = sorted(range(len(grid)), key=lambda idx: -grid[idx].lam) if warm_starts else range(len(grid))
    points: Dict[int, PathPoint] = {}
    previous: Optional[List[NodeFit]] = None
    for idx in order:
        cfg = grid[idx]
        fits = fit_graph(d, cfg, family, basis, settings, threads, previous if warm_starts else None)
        graph = symmetrize(fits, rule)
        points[idx] = PathPoint(config=cfg, edge_count=graph.edge_count, graph=graph)
        logger.info("lambda=%g beta=%g gamma=%g: %d edges", cfg.lam, cfg.beta, cfg.gamma, graph.edge_count)
        previous = fits
    return [points[idx] for idx in range(len(grid))]


class LambdaSelection(NamedTuple):
    config: PenaltyConfig
    graph: GraphEstimate
    fits: List[NodeFit]
    hit: bool


def lambda_ceiling(d: ReplicateDataset, family: Optional[NodeFamily] = None) -> float:
    """
    max_j max_k |x_k^T (x_j - D'(0))| / nT: every theta is zero at and above this level
    when alpha and Delta are zero.
    """
    d = prepare_dataset(d)
    family = family or family_for(d.family)
    stacked = d.stacked()
    residual = stacked - family.mean(np.zeros_like(stacked))
    gram = np.abs(stacked.T @ residual) / stacked.shape[0]
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def select_lambda_for_edges(
    d: ReplicateDataset,
    base_cfg: PenaltyConfig,
    target: int,
    rule: Union[str, Rule] = Rule.INTERSECTION,
    family: Optional[NodeFamily] = None,
    basis: Optional[FusedBasis] = None,
    settings: Optional[SolverSettings] = None,
    threads: int = 1,
    tie_beta: bool = False,
    max_iter: int = 40,
) -> LambdaSelection:
    """
    Bisect log(lambda) until the symmetrized graph has ``target`` edges.

    The upper end starts at twice :func:`lambda_ceiling` and grows tenfold (at most
    ``MAX_WIDENINGS`` times) while it still yields more than ``target`` edges.

    :param tie_beta: move beta together with lambda; otherwise beta stays at base_cfg.beta.
    :return: the matching configuration, or the closest one seen with ``hit=False``.
    """
    d = prepare_dataset(d)
    basis = basis or fused_basis.build(d.n, d.T)
    high = 2.0 * lambda_ceiling(d, family) + 1e-12
    low = high * 1e-4
    best: Optional[LambdaSelection] = None
    previous: Optional[List[NodeFit]] = None

    def evaluate(lam: float) -> LambdaSelection:
        nonlocal best, previous
        cfg = PenaltyConfig(
            lam=lam,
            beta=lam if tie_beta else base_cfg.beta,
            gamma=base_cfg.gamma,
            drop_alpha=base_cfg.drop_alpha,
            drop_delta=base_cfg.drop_delta,
        )
        fits = fit_graph(d, cfg, family, basis, settings, threads, previous)
        previous = fits
        graph = symmetrize(fits, rule)
        selection = LambdaSelection(config=cfg, graph=graph, fits=fits, hit=graph.edge_count == target)
        if best is None or abs(graph.edge_count - target) < abs(best.graph.edge_count - target):
            best = selection
        return selection

    for _ in range(MAX_WIDENINGS):
        if evaluate(high).graph.edge_count <= target:
            break
        logger.debug("lambda=%.6g still gives more than %d edges; widening the search", high, target)
        low, high = high, high * 10.0

    for _ in range(max_iter):
        if best.hit:
            break
        lam = math.sqrt(low * high)
        if evaluate(lam).graph.edge_count > target:
            low = lam
        else:
            high = lam

    if not best.hit:
        logger.warning("No lambda in the search produced %d edges; closest has %d", target, best.graph.edge_count)
    return best


def graph_difference(a: GraphEstimate, b: GraphEstimate) -> Tuple[FrozenSet[Edge], FrozenSet[Edge]]:
    """Edges only in ``a`` and edges only in ``b``."""
    if a.p != b.p:
        raise DimensionError(f"Cannot compare graphs over p={a.p} and p={b.p} nodes")
    return a.edges - b.edges, b.edges - a.edges


def graph_document(graph: GraphEstimate) -> Dict[str, object]:
    """JSON-ready form with 1-based node indices."""
    edges = graph.sorted_edges()
    return {
        "p": graph.p,
        "rule": graph.rule.value,
        "edges": [[j + 1, k + 1] for j, k in edges],
        "coefficients": {
            f"{j + 1},{k + 1}": list(graph.coefficients[(j, k)]) for j, k in edges if (j, k) in graph.coefficients
        },
    }


def write_graph_json(graph: GraphEstimate, path: str) -> str:
    with open(path, "w", encoding="utf-8") as graph_file:
        json.dump(graph_document(graph), graph_file, indent=2)
        graph_file.write("\n")
    return path


def read_graph_json(path: str) -> GraphEstimate:
    """Inverse of :func:`write_graph_json`."""
    try:
        with open(path, "r", encoding="utf-8") as graph_file:
            document = json.load(graph_file)
        p = int(document["p"])
        edges = frozenset((int(j) - 1, int(k) - 1) for j, k in document["edges"])
        coefficients = {}
        for key, pair in document.get("coefficients", {}).items():
            j, k = (int(part) - 1 for part in key.split(","))
            coefficients[(j, k)] = (float(pair[0]), float(pair[1]))
        rule = Rule(document.get("rule", Rule.INTERSECTION.value))
        return GraphEstimate(p=p, edges=edges, rule=rule, coefficients=coefficients)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"Could not read graph '{path}': {exc}") from exc


def write_coefficients_csv(fits: Sequence[NodeFit], path: str) -> str:
    """One theta row (theta_jj written as 0) and one alpha row per node: ``node,block,v1..vp``."""
    p = fits[0].p
    rows = []
    for fit in sorted(fits, key=lambda fit: fit.j):
        rows.append([fit.j + 1, "theta", *fit.theta_full()])
        rows.append([fit.j + 1, "alpha", *fit.alpha])
    frame = pd.DataFrame(rows, columns=["node", "block", *[f"v{k}" for k in range(1, p + 1)]])
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_delta_csv(fits: Sequence[NodeFit], n: int, T: int, path: str) -> str:  # pylint: disable=invalid-name
    """Long format ``node,subject,time,delta``."""
    frames = []
    for fit in sorted(fits, key=lambda fit: fit.j):
        frames.append(
            pd.DataFrame(
                {
                    "node": fit.j + 1,
                    "subject": np.repeat(np.arange(1, n + 1), T),
                    "time": np.tile(np.arange(1, T + 1), n),
                    "delta": fit.delta,
                }
            )
        )
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path
