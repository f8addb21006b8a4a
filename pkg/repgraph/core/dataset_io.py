"""
Dataset CSV ingestion and emission.

Format: header ``subject,time,v1,...,vp``; rows sorted by (subject, time); subjects and
times are 1-based consecutive integers; every cell present. Edge lists use the header
``j,k`` with 1-based node indices.
"""

import logging
from typing import FrozenSet
from typing import Iterable
from typing import Optional
from typing import Union

import numpy as np
import pandas as pd

from repgraph.core.model import Edge
from repgraph.core.model import Family
from repgraph.core.model import ReplicateDataset
from repgraph.errors import DatasetError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def read_dataset_csv(path: str, family: Union[str, Family] = Family.GAUSSIAN) -> ReplicateDataset:
    """
    Read a dataset CSV.

    :param path: file to read.
    :param family: family of every variable.
    :return: the (uncentered) dataset.
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DatasetError(f"Could not read dataset '{path}': {exc}") from exc

    columns = list(frame.columns)
    if columns[:2] != ["subject", "time"] or len(columns) < 3:
        raise DatasetError(f"Dataset '{path}' must start with 'subject,time' followed by variable columns")
    expected = [f"v{k}" for k in range(1, len(columns) - 1)]
    if columns[2:] != expected:
        raise DatasetError(f"Dataset '{path}' variable columns must be named v1..v{len(expected)}")
    if frame.isna().to_numpy().any():
        raise DatasetError(f"Dataset '{path}' has missing cells")

    try:
        subjects = pd.to_numeric(frame["subject"]).to_numpy()
        times = pd.to_numeric(frame["time"]).to_numpy()
        cells = frame[expected].to_numpy(dtype=float)
        n = int(subjects.max()) if len(subjects) else 0
        T = int(times.max()) if len(times) else 0  # pylint: disable=invalid-name
    except (ValueError, TypeError, OverflowError) as exc:
        raise DatasetError(f"Dataset '{path}' has a non-numeric cell: {exc}") from exc
    if n < 1 or T < 1 or len(frame) != n * T:
        raise DatasetError(f"Dataset '{path}' is not rectangular: {len(frame)} rows for {n} subjects")
    expected_subjects = np.repeat(np.arange(1, n + 1), T)
    expected_times = np.tile(np.arange(1, T + 1), n)
    if not (np.array_equal(subjects, expected_subjects) and np.array_equal(times, expected_times)):
        raise DatasetError(
            f"Dataset '{path}' rows must be sorted by (subject, time) with consecutive 1-based indices"
        )

    values = cells.reshape(n, T, len(expected))
    logger.info("Read dataset %s: n=%d T=%d p=%d", path, n, T, len(expected))
    return ReplicateDataset(values=values, family=Family.parse(family))


def dataset_frame(d: ReplicateDataset) -> pd.DataFrame:
    """The long-format frame written by :func:`write_dataset_csv`."""
    frame = pd.DataFrame(d.stacked(), columns=[f"v{k}" for k in range(1, d.p + 1)])
    frame.insert(0, "time", np.tile(np.arange(1, d.T + 1), d.n))
    frame.insert(0, "subject", np.repeat(np.arange(1, d.n + 1), d.T))
    return frame


def write_dataset_csv(d: ReplicateDataset, path: str) -> str:
    """Write ``d`` in the dataset CSV format; values with 17 significant digits."""
    frame = dataset_frame(d)
    if d.family is not Family.GAUSSIAN:
        integer_columns = [f"v{k}" for k in range(1, d.p + 1)]
        frame[integer_columns] = frame[integer_columns].astype(np.int64)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_edge_list_csv(path: str, p: Optional[int] = None) -> FrozenSet[Edge]:
    """Read a ``j,k`` edge list (1-based) into 0-based pairs with j < k."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DatasetError(f"Could not read edge list '{path}': {exc}") from exc
    if list(frame.columns) != ["j", "k"]:
        raise DatasetError(f"Edge list '{path}' must have the header 'j,k'")
    edges = set()
    for j, k in frame.itertuples(index=False):
        low, high = sorted((int(j) - 1, int(k) - 1))
        if low == high or low < 0 or (p is not None and high >= p):
            raise DatasetError(f"Edge list '{path}' has an invalid pair ({j}, {k})")
        edges.add((low, high))
    return frozenset(edges)


def write_edge_list_csv(edges: Iterable[Edge], path: str) -> str:
    rows = sorted(edges)
    frame = pd.DataFrame({"j": [j + 1 for j, _ in rows], "k": [k + 1 for _, k in rows]}, columns=["j", "k"])
    frame.to_csv(path, index=False, lineterminator="\n")
    return path
