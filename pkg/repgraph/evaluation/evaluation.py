"""
Structure-recovery scores: true/false positive rates, ROC paths over a tuning grid and the
trapezoidal area under them.
"""

import json
import logging
from typing import Dict
from typing import FrozenSet
from typing import Iterable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from repgraph.core.families import NodeFamily
from repgraph.core.model import Edge
from repgraph.core.model import GraphEstimate
from repgraph.core.model import PenaltyConfig
from repgraph.core.model import ReplicateDataset
from repgraph.core.model import Rule
from repgraph.errors import DatasetError
from repgraph.errors import DimensionError
from repgraph.graphs.graph_assembly import FLOAT_FORMAT
from repgraph.graphs.graph_assembly import SolverSettings
from repgraph.graphs.graph_assembly import edge_count_path
from repgraph.solvers.fused_basis import FusedBasis

logger = logging.getLogger(__name__)

ROC_COLUMNS = ["lambda", "beta", "gamma", "edges", "tpr", "fpr"]


def normalize_edges(edges: Iterable[Edge], p: int) -> FrozenSet[Edge]:
    """Edges as (min, max) pairs; self loops and out-of-range nodes are rejected."""
    normalized = set()
    for j, k in edges:
        j, k = int(j), int(k)
        if j == k or not (0 <= j < p and 0 <= k < p):
            raise DimensionError(f"Edge ({j}, {k}) is not a pair of distinct nodes in 0..{p - 1}")
        normalized.add((min(j, k), max(j, k)))
    return frozenset(normalized)


def tpr_fpr(
    est: Union[GraphEstimate, Iterable[Edge]], truth: Iterable[Edge], p: int
) -> Tuple[Optional[float], Optional[float]]:
    """
    True positive rate over the true edges and false positive rate over the true non-edges.

    :return: (tpr, fpr); a rate whose denominator is zero is None.
    """
    if isinstance(est, GraphEstimate):
        if est.p != p:
            raise DimensionError(f"Estimate has p={est.p}, expected p={p}")
        est = est.edges
    if p < 2:
        raise DimensionError("Scoring needs at least two nodes")
    estimated = normalize_edges(est, p)
    true_edges = normalize_edges(truth, p)
    non_edges = p * (p - 1) // 2 - len(true_edges)
    tpr = len(estimated & true_edges) / len(true_edges) if true_edges else None
    fpr = len(estimated - true_edges) / non_edges if non_edges else None
    return tpr, fpr


def roc_auc(points: Iterable[Tuple[float, float]]) -> float:
    """
    Trapezoidal area under (fpr, tpr) points after adding (0, 0) and (1, 1).

    Points sharing an fpr keep only their largest tpr.
    """
    best: Dict[float, float] = {0.0: 0.0, 1.0: 1.0}
    for fpr, tpr in points:
        fpr, tpr = float(fpr), float(tpr)
        if not (0.0 <= fpr <= 1.0 and 0.0 <= tpr <= 1.0):
            raise DimensionError(f"ROC point ({fpr}, {tpr}) outside the unit square")
        best[fpr] = max(best.get(fpr, tpr), tpr)
    fprs = np.array(sorted(best))
    tprs = np.array([best[fpr] for fpr in fprs])
    return float(trapezoid(tprs, fprs))


class RocRow(NamedTuple):
    lam: float
    beta: float
    gamma: float
    edges: int
    tpr: Optional[float]
    fpr: Optional[float]


def roc_path(
    d: ReplicateDataset,
    grid: Sequence[PenaltyConfig],
    truth: Iterable[Edge],
    rule: Union[str, Rule] = Rule.INTERSECTION,
    family: Optional[NodeFamily] = None,
    basis: Optional[FusedBasis] = None,
    settings: Optional[SolverSettings] = None,
    threads: int = 1,
    warm_starts: bool = True,
) -> List[RocRow]:
    """Score the symmetrized graph of every grid configuration, in grid order."""
    truth = normalize_edges(truth, d.p)
    rows = []
    for point in edge_count_path(d, grid, rule, family, basis, settings, threads, warm_starts):
        tpr, fpr = tpr_fpr(point.graph, truth, d.p)
        rows.append(RocRow(point.config.lam, point.config.beta, point.config.gamma, point.edge_count, tpr, fpr))
    return rows


def path_auc(rows: Iterable[RocRow]) -> Optional[float]:
    """AUC of the rows with both rates defined; None when there are none."""
    points = [(row.fpr, row.tpr) for row in rows if row.tpr is not None and row.fpr is not None]
    if not points:
        return None
    return roc_auc(points)


def write_roc_csv(rows: Sequence[RocRow], path: str) -> str:
    """``lambda,beta,gamma,edges,tpr,fpr``; undefined rates are left empty."""
    frame = pd.DataFrame([tuple(row) for row in rows], columns=ROC_COLUMNS)
    frame["edges"] = frame["edges"].astype(int)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_roc_csv(path: str) -> List[RocRow]:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError) as exc:
        raise DatasetError(f"Could not read ROC file '{path}': {exc}") from exc
    missing = [column for column in ROC_COLUMNS if column not in frame.columns]
    if missing:
        raise DatasetError(f"ROC file '{path}' lacks columns {missing}")

    def _rate(value) -> Optional[float]:
        return None if pd.isna(value) else float(value)

    return [
        RocRow(float(row.lam), float(row.beta), float(row.gamma), int(row.edges), _rate(row.tpr), _rate(row.fpr))
        for row in frame.rename(columns={"lambda": "lam"}).itertuples(index=False)
    ]


def score_document(est: GraphEstimate, truth: Iterable[Edge]) -> Dict[str, object]:
    """Counts and rates of one estimate, for the score JSON."""
    truth = normalize_edges(truth, est.p)
    tpr, fpr = tpr_fpr(est, truth, est.p)
    return {
        "p": est.p,
        "estimated_edges": est.edge_count,
        "true_edges": len(truth),
        "true_positives": len(est.edges & truth),
        "false_positives": len(est.edges - truth),
        "tpr": tpr,
        "fpr": fpr,
    }


def auc_document(rows: Sequence[RocRow]) -> Dict[str, object]:
    return {"points": len(rows), "auc": path_auc(rows)}


def write_json(document: Dict[str, object], path: str) -> str:
    with open(path, "w", encoding="utf-8") as json_file:
        json.dump(document, json_file, indent=2)
        json_file.write("\n")
    return path
