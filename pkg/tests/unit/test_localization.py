import numpy as np
import pytest

from darksol.core.exceptions import BadOrdering
from darksol.core.field_ops import Grid, energy, momentum
from darksol.core.localization import (
    build_cutoffs,
    default_rates,
    functional_G,
    localized_momenta,
    localized_momentum,
    tanh_step,
    tilde_momentum,
)
from darksol.core.modulation import ChainSpec, build_chain
from darksol.core.profile import soliton_momentum

pytestmark = pytest.mark.unit


@pytest.fixture
def chain_grid():
    return Grid(1024, 160.0)


@pytest.fixture
def chain(gp, chain_grid):
    return build_chain(ChainSpec((1.0, 1.2), (-20.0, 20.0)), gp, chain_grid)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_step_derivatives(order):
    x = np.linspace(-5.0, 5.0, 101)
    h = 1e-5
    lower = order - 1
    numeric = (tanh_step(x + h, 0.3, 0.7, lower) - tanh_step(x - h, 0.3, 0.7, lower)) / (2.0 * h)
    np.testing.assert_allclose(tanh_step(x, 0.3, 0.7, order), numeric, atol=1e-8)


def test_step_rejects_high_order():
    with pytest.raises(ValueError):
        tanh_step(np.zeros(3), 0.0, 1.0, 4)


def test_default_rates():
    assert default_rates(0.8) == pytest.approx((0.1, 0.05))


def test_partition_of_unity(rng):
    grid = Grid(512, 200.0)
    for _ in range(5):
        a = np.sort(rng.uniform(-60.0, 60.0, 3))
        family = build_cutoffs(a, L=rng.uniform(5.0, 30.0), tau=rng.uniform(0.05, 1.0), tau0=0.04, grid=grid)
        assert family.partition_defect() < 1e-12


def test_chi_windows_telescope(chain_grid):
    family = build_cutoffs((-30.0, 0.0, 25.0), L=20.0, tau=0.2, tau0=0.1, grid=chain_grid)
    np.testing.assert_array_equal(family.chi(1), np.ones(chain_grid.n))
    np.testing.assert_array_equal(family.chi(4), np.zeros(chain_grid.n))
    total = sum(family.chi_window(k) for k in range(1, 4))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)
    assert family.chi_center(2) == pytest.approx(-15.0)


def test_bump_is_one_at_its_soliton(chain_grid):
    family = build_cutoffs((-40.0, 40.0), L=40.0, tau=1.0, tau0=0.5, grid=chain_grid)
    for k, a in enumerate(family.a, start=1):
        j = int(np.argmin(np.abs(chain_grid.x - a)))
        assert family.phi(k)[j] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize(
    "a, tau, tau0",
    [((0.0, 0.0), 0.2, 0.1), ((5.0, -5.0), 0.2, 0.1), ((-5.0, 5.0), 0.2, 0.4), ((-5.0, 5.0), 0.2, 0.0)],
)
def test_cutoff_validation(small_grid, a, tau, tau0):
    with pytest.raises(BadOrdering):
        build_cutoffs(a, L=4.0, tau=tau, tau0=tau0, grid=small_grid)


def test_localized_momenta_sum_to_total(chain, chain_grid):
    family = build_cutoffs((-20.0, 20.0), L=30.0, tau=0.1, tau0=0.05, grid=chain_grid)
    assert localized_momenta(chain, family).sum() == pytest.approx(momentum(chain), abs=1e-12)
    assert tilde_momentum(chain, family, 1) == pytest.approx(momentum(chain), abs=1e-12)
    assert tilde_momentum(chain, family, 2) == pytest.approx(localized_momentum(chain, family, 2), abs=1e-14)


def test_localized_momenta_capture_each_soliton(gp, chain, chain_grid):
    family = build_cutoffs((-20.0, 20.0), L=30.0, tau=0.3, tau0=0.5, grid=chain_grid)
    values = localized_momenta(chain, family)
    np.testing.assert_allclose(values, [soliton_momentum(gp, 1.0), soliton_momentum(gp, 1.2)], atol=1e-6)


def test_single_window_functional(gp, chain, chain_grid):
    family = build_cutoffs((0.0,), L=30.0, tau=0.1, tau0=0.05, grid=chain_grid)
    expected = energy(chain, gp) - 1.1 * momentum(chain)
    assert functional_G(chain, gp, [1.1], family) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(BadOrdering):
        functional_G(chain, gp, [1.0, 1.2], family)


def test_functional_is_translation_invariant(gp, chain, chain_grid):
    m = 13
    shift = m * chain_grid.dx
    base = build_cutoffs((-20.0, 20.0), L=30.0, tau=0.1, tau0=0.05, grid=chain_grid)
    moved = build_cutoffs((-20.0 + shift, 20.0 + shift), L=30.0, tau=0.1, tau0=0.05, grid=chain_grid)
    c_star = [1.0, 1.2]
    assert functional_G(chain.shift_cells(m), gp, c_star, moved) == pytest.approx(
        functional_G(chain, gp, c_star, base), rel=1e-10
    )
