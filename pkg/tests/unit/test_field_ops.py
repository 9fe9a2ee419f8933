import numpy as np
import pytest

from darksol.core.exceptions import ConfigError, NonFinite, VacuumBreach
from darksol.core.field_ops import (
    FieldPair,
    Grid,
    HydroField,
    derivative,
    energy,
    grad_energy,
    grad_momentum,
    hessian_energy_apply,
    inner,
    momentum,
    momentum_pairing,
    quadratic_form_direct,
    translate,
    x_norm,
)
from darksol.core.profile import build_profile
from tests.conftest import gaussian_pair

pytestmark = pytest.mark.unit


@pytest.fixture
def soliton(gp, medium_grid):
    return build_profile(gp, 1.0, medium_grid).field


def test_grid_geometry():
    grid = Grid(128, 32.0)
    assert grid.dx == pytest.approx(0.25)
    assert grid.x[0] == pytest.approx(-16.0)
    assert grid.x[-1] == pytest.approx(16.0 - 0.25)
    assert grid.wrap(20.0) == pytest.approx(-12.0)
    assert grid.refined().n == 256


@pytest.mark.parametrize("n, length", [(100, 10.0), (8, 10.0), (64, 0.0)])
def test_grid_validation(n, length):
    with pytest.raises(ConfigError):
        Grid(n, length)


def test_spectral_derivative_is_exact_for_resolved_modes():
    grid = Grid(64, 2.0 * np.pi)
    u = np.sin(3.0 * grid.x)
    np.testing.assert_allclose(derivative(u, grid), 3.0 * np.cos(3.0 * grid.x), atol=1e-12)
    np.testing.assert_allclose(derivative(u, grid, 2), -9.0 * u, atol=1e-11)
    fd = derivative(u, grid, 1, method="fd")
    np.testing.assert_allclose(fd, 3.0 * np.cos(3.0 * grid.x), atol=0.1)


def test_translation_by_whole_cells_is_a_roll(soliton):
    grid = soliton.grid
    moved = translate(soliton, 7 * grid.dx)
    rolled = soliton.shift_cells(7)
    np.testing.assert_allclose(moved.eta, rolled.eta, atol=1e-12)
    np.testing.assert_allclose(moved.v, rolled.v, atol=1e-12)


def test_hydro_field_rejects_vacuum_and_nan(small_grid):
    eta = np.zeros(small_grid.n)
    eta[10] = 1.0
    with pytest.raises(VacuumBreach):
        HydroField(eta, np.zeros(small_grid.n), small_grid)
    eta[10] = np.nan
    with pytest.raises(NonFinite):
        HydroField(eta, np.zeros(small_grid.n), small_grid)


def test_field_shape_must_match_grid(small_grid):
    with pytest.raises(ConfigError):
        FieldPair(np.zeros(10), np.zeros(10), small_grid)


def test_functionals_vanish_on_zero_field(gp, small_grid):
    zero = FieldPair.zeros(small_grid)
    assert energy(zero, gp) == 0.0
    assert momentum(zero) == 0.0
    assert x_norm(zero) == 0.0


def test_energy_gradient_matches_directional_derivative(gp, soliton):
    eps = gaussian_pair(soliton.grid, center=1.0)
    h = 1e-5
    numeric = (energy(soliton + h * eps, gp) - energy(soliton - h * eps, gp)) / (2.0 * h)
    assert inner(grad_energy(soliton, gp), eps) == pytest.approx(numeric, rel=1e-7)


def test_soliton_is_critical_for_e_minus_cp(gp, soliton):
    residual = grad_energy(soliton, gp) - 1.0 * grad_momentum(soliton)
    assert x_norm(residual) < 1e-8


def test_hessian_apply_matches_quadratic_form(gp, soliton):
    eps = gaussian_pair(soliton.grid, center=-0.5)
    applied = inner(hessian_energy_apply(soliton, eps, gp), eps)
    assert applied == pytest.approx(quadratic_form_direct(soliton, eps, gp), rel=1e-10)


def test_quadratic_form_matches_second_difference(gp, soliton):
    eps = gaussian_pair(soliton.grid, center=0.7)
    h = 1e-3
    numeric = (
        energy(soliton + h * eps, gp) - 2.0 * energy(soliton, gp) + energy(soliton - h * eps, gp)
    ) / h ** 2
    assert quadratic_form_direct(soliton, eps, gp) == pytest.approx(numeric, rel=1e-4)


def test_momentum_pairing_is_gradient_action(soliton):
    eps = gaussian_pair(soliton.grid)
    assert momentum_pairing(soliton, eps) == pytest.approx(inner(grad_momentum(soliton), eps), rel=1e-14)


def test_x_norm_of_plane_wave():
    grid = Grid(64, 2.0 * np.pi)
    field = FieldPair(np.cos(2.0 * grid.x), np.zeros(grid.n), grid)
    # int cos^2 + 4 sin^2 over one period = pi + 4 pi
    assert x_norm(field) == pytest.approx(np.sqrt(5.0 * np.pi), rel=1e-12)
