"""
First-difference basis of the latent-effect block and its change of variables.

For a subject block Delta_i in R^T, ``M = [C; 1^T]`` maps Delta_i to its T-1 consecutive
differences followed by its sum. The stacked transform over n subjects orders the output as
all difference blocks (subject-major) followed by all n sums, matching the row order of
``[(I_n kron C); (I_n kron 1^T)]``. The transform is applied blockwise; the nT x nT matrix
is never formed outside of :meth:`FusedBasis.dense_transform`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor
from scipy.linalg import lu_solve

from repgraph.errors import DimensionError


def difference_matrix(T: int) -> np.ndarray:  # pylint: disable=invalid-name
    """(T-1) x T matrix with -1 at (r, r) and +1 at (r, r+1)."""
    C = np.zeros((T - 1, T))  # pylint: disable=invalid-name
    rows = np.arange(T - 1)
    C[rows, rows] = -1.0
    C[rows, rows + 1] = 1.0
    return C


@dataclass(frozen=True, eq=False)
class FusedBasis:
    """Immutable per-(n, T) basis; build it with :func:`build`."""

    n: int
    T: int  # pylint: disable=invalid-name
    C: np.ndarray  # pylint: disable=invalid-name
    M: np.ndarray  # pylint: disable=invalid-name
    M_inv: np.ndarray  # pylint: disable=invalid-name

    @property
    def size(self) -> int:
        return self.n * self.T

    @property
    def n_differences(self) -> int:
        return self.n * (self.T - 1)

    def penalty_weights(self) -> np.ndarray:
        """1 on the difference coordinates of H, 0 on the sum coordinates."""
        return np.concatenate([np.ones(self.n_differences), np.zeros(self.n)])

    def to_blocks(self, h: np.ndarray) -> np.ndarray:
        """Rearrange H into an (n, T) array whose row i is (differences_i, sum_i)."""
        h = self._check(h)
        blocks = np.empty((self.n, self.T))
        blocks[:, :-1] = h[: self.n_differences].reshape(self.n, self.T - 1)
        blocks[:, -1] = h[self.n_differences :]
        return blocks

    def from_blocks(self, blocks: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_blocks`."""
        blocks = np.asarray(blocks, dtype=float)
        return np.concatenate([blocks[:, :-1].reshape(-1), blocks[:, -1]])

    def fused_penalty(self, delta: np.ndarray) -> float:
        """sum_i ||C Delta_i||_1."""
        delta = self._check(delta).reshape(self.n, self.T)
        return float(np.abs(np.diff(delta, axis=1)).sum())

    def dense_transform(self) -> np.ndarray:
        """The full nT x nT stacked transform (tests and diagnostics only)."""
        eye = np.eye(self.n)
        return np.vstack([np.kron(eye, self.C), np.kron(eye, np.ones((1, self.T)))])

    def _check(self, vector: np.ndarray) -> np.ndarray:
        vector = np.asarray(vector, dtype=float).reshape(-1)
        if vector.shape[0] != self.size:
            raise DimensionError(f"Expected a vector of length nT={self.size}, got {vector.shape[0]}")
        return vector


def build(n: int, T: int) -> FusedBasis:  # pylint: disable=invalid-name
    """
    Build the basis for n subjects with T replicates each.

    :raises DimensionError: when T < 2 (no differences exist) or n < 1.
    """
    if T < 2:
        raise DimensionError(f"The fused basis needs T >= 2 replicates, got T={T}")
    if n < 1:
        raise DimensionError(f"The fused basis needs at least one subject, got n={n}")
    C = difference_matrix(T)  # pylint: disable=invalid-name
    M = np.vstack([C, np.ones((1, T))])  # pylint: disable=invalid-name
    M_inv = lu_solve(lu_factor(M), np.eye(T))  # pylint: disable=invalid-name
    for array in (C, M, M_inv):
        array.flags.writeable = False
    return FusedBasis(n=n, T=T, C=C, M=M, M_inv=M_inv)


def to_h(basis: FusedBasis, delta: np.ndarray) -> np.ndarray:
    """H = C~ Delta: per-subject consecutive differences first, then per-subject sums."""
    blocks = basis._check(delta).reshape(basis.n, basis.T)  # pylint: disable=protected-access
    return np.concatenate([np.diff(blocks, axis=1).reshape(-1), blocks.sum(axis=1)])


def from_h(basis: FusedBasis, h: np.ndarray) -> np.ndarray:
    """Delta = C~^{-1} H, the exact inverse of :func:`to_h`."""
    blocks = basis.to_blocks(h)
    return (blocks @ basis.M_inv.T).reshape(-1)
