import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from repgraph.core.families import family_for
from repgraph.core.families import family_gaussian
from repgraph.core.families import family_ising
from repgraph.core.families import family_poisson
from repgraph.core.model import Family
from repgraph.errors import FamilyMismatchError

ETA_GRID = np.linspace(-6.0, 6.0, 241)


@pytest.mark.parametrize("family", [family_gaussian(), family_ising(), family_poisson()], ids=lambda f: f.name.value)
def test_mean_matches_finite_differences(family):
    step = 1e-5
    numeric = (family.log_partition(ETA_GRID + step) - family.log_partition(ETA_GRID - step)) / (2.0 * step)
    scale = np.maximum(1.0, np.abs(family.mean(ETA_GRID)))
    assert np.max(np.abs(numeric - family.mean(ETA_GRID)) / scale) < 1e-6


@pytest.mark.parametrize("family", [family_gaussian(), family_ising(), family_poisson()], ids=lambda f: f.name.value)
def test_variance_matches_finite_differences(family):
    step = 1e-5
    numeric = (family.mean(ETA_GRID + step) - family.mean(ETA_GRID - step)) / (2.0 * step)
    scale = np.maximum(1.0, np.abs(family.variance(ETA_GRID)))
    assert np.max(np.abs(numeric - family.variance(ETA_GRID)) / scale) < 1e-6


def test_ising_majorization_with_unit_curvature():
    family = family_ising()
    assert family.lipschitz_L == 1.0
    for center in ETA_GRID[::10]:
        bound = (
            family.log_partition(center)
            + family.mean(center) * (ETA_GRID - center)
            + 0.5 * family.lipschitz_L * (ETA_GRID - center) ** 2
        )
        assert np.all(family.log_partition(ETA_GRID) <= bound + 1e-12)


def test_point_values():
    ising = family_ising()
    assert ising.log_partition(np.array(0.0)) == pytest.approx(math.log(2.0))
    assert ising.mean(np.array(0.0)) == pytest.approx(0.5)
    assert_allclose(family_gaussian().mean(np.array([-1.0, 0.0, 2.0])), [-1.0, 0.0, 2.0])
    assert family_poisson().mean(np.array(0.0)) == pytest.approx(1.0)


def test_poisson_cap_sets_curvature():
    family = family_poisson(eta_cap=3.0)
    assert family.eta_cap == 3.0
    assert family.lipschitz_L == pytest.approx(math.exp(3.0))
    assert family.curvature_bound == family.lipschitz_L


def test_curvature_bounds():
    assert family_gaussian().curvature_bound == 1.0
    assert family_ising().curvature_bound == 0.25
    assert family_ising().lipschitz_L == 1.0
    assert family_poisson().curvature_bound == pytest.approx(math.exp(6.0))
    assert np.max(family_ising().variance(ETA_GRID)) <= family_ising().curvature_bound


def test_loss_is_average_negative_log_likelihood():
    family = family_ising()
    x = np.array([1.0, 0.0, 1.0])
    eta = np.array([0.5, -1.0, 2.0])
    expected = np.mean(np.log1p(np.exp(eta)) - x * eta)
    assert family.loss(x, eta) == pytest.approx(expected)


def test_family_for():
    assert family_for(Family.POISSON).name is Family.POISSON
    assert family_for("ising").name is Family.ISING
    with pytest.raises(FamilyMismatchError):
        family_for("gamma")


def test_poisson_majorization_below_the_cap():
    family = family_poisson()
    admissible = ETA_GRID[ETA_GRID <= family.eta_cap]
    for center in admissible[::10]:
        bound = (
            family.log_partition(center)
            + family.mean(center) * (admissible - center)
            + 0.5 * family.lipschitz_L * (admissible - center) ** 2
        )
        assert np.all(family.log_partition(admissible) <= bound * (1.0 + 1e-12) + 1e-9)
