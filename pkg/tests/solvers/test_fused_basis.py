import numpy as np
import pytest
from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal

from repgraph.errors import DimensionError
from repgraph.solvers import fused_basis
from repgraph.solvers.fused_basis import from_h
from repgraph.solvers.fused_basis import to_h


def test_difference_matrices():
    assert_array_equal(fused_basis.build(1, 2).C, [[-1.0, 1.0]])
    assert_array_equal(fused_basis.build(1, 3).C, [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]])
    for T in (2, 5, 17):
        basis = fused_basis.build(1, T)
        assert_allclose(basis.C @ np.full(T, 3.7), 0.0, atol=1e-15)
        assert_allclose(basis.M @ basis.M_inv, np.eye(T), atol=1e-12)


def test_build_needs_two_replicates():
    with pytest.raises(DimensionError):
        fused_basis.build(3, 1)
    with pytest.raises(DimensionError):
        fused_basis.build(0, 4)


def test_to_h_by_hand():
    basis = fused_basis.build(1, 3)
    assert_allclose(to_h(basis, np.array([1.0, 2.0, 4.0])), [1.0, 2.0, 7.0])


def test_constant_blocks_have_zero_differences():
    basis = fused_basis.build(2, 4)
    h = to_h(basis, np.array([1.5] * 4 + [-2.0] * 4))
    assert_array_equal(h[: basis.n_differences], 0.0)
    assert_allclose(h[basis.n_differences :], [6.0, -8.0])


def test_to_h_matches_dense_transform():
    basis = fused_basis.build(2, 5)
    delta = np.random.default_rng(4).normal(size=basis.size)
    assert_allclose(to_h(basis, delta), basis.dense_transform() @ delta, atol=1e-12)


def test_from_h_of_pure_sums_is_constant():
    basis = fused_basis.build(2, 4)
    h = np.concatenate([np.zeros(basis.n_differences), [2.0, -1.0]])
    assert_allclose(from_h(basis, h), [0.5] * 4 + [-0.25] * 4, atol=1e-12)
    assert_array_equal(from_h(basis, np.zeros(basis.size)), 0.0)


@pytest.mark.parametrize("n,T", [(3, 5), (20, 128), (1, 2)])
def test_round_trip_and_penalty_equivalence(n, T):
    basis = fused_basis.build(n, T)
    rng = np.random.default_rng(n * 1000 + T)
    delta = rng.normal(size=basis.size)
    h = to_h(basis, delta)
    assert np.max(np.abs(from_h(basis, h) - delta)) < 1e-10
    penalty = basis.fused_penalty(delta)
    assert abs(np.abs(h[: basis.n_differences]).sum() - penalty) <= 1e-12 * max(1.0, penalty)


def test_blocks_rearrangement():
    basis = fused_basis.build(2, 3)
    h = np.arange(6.0)
    blocks = basis.to_blocks(h)
    assert_array_equal(blocks, [[0.0, 1.0, 4.0], [2.0, 3.0, 5.0]])
    assert_array_equal(basis.from_blocks(blocks), h)
    assert_array_equal(basis.penalty_weights(), [1.0, 1.0, 1.0, 1.0, 0.0, 0.0])


def test_length_mismatch():
    basis = fused_basis.build(2, 3)
    with pytest.raises(DimensionError):
        to_h(basis, np.zeros(5))
    with pytest.raises(DimensionError):
        from_h(basis, np.zeros(7))
