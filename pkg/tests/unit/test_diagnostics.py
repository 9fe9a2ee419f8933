import numpy as np
import pytest

from darksol.core.field_ops import FieldPair, Grid, integrate, x_norm
from darksol.core.localization import build_cutoffs
from darksol.core.modulation import ChainSpec, TrackResult, build_chain, chain_derivatives, decompose
from darksol.core.profile import build_profile
from darksol.services.diagnostics import (
    alpha_halving,
    energy_drift_check,
    expansion_check,
    expansion_remainder_scaling,
    expansion_tail_decay,
    modulation_matrix_check,
    momentum_hessian_bound,
    monotonicity_envelope,
    monotonicity_report,
    project_orthogonal,
    record,
    smooth_perturbation,
    stability_report,
    taylor_remainder_check,
    virial_identity_check,
    virial_suite,
)
from tests.conftest import gaussian_pair

pytestmark = pytest.mark.unit


@pytest.fixture
def soliton(gp, medium_grid):
    return build_profile(gp, 1.0, medium_grid).field


def test_smooth_perturbation_is_normalized(medium_grid):
    eps = smooth_perturbation(medium_grid, seed=3, width=5.0)
    assert x_norm(eps) == pytest.approx(1.0, rel=1e-12)
    again = smooth_perturbation(medium_grid, seed=3, width=5.0)
    np.testing.assert_array_equal(eps.eta, again.eta)


def test_virial_identity_for_global_weight(gp, soliton):
    report = virial_identity_check(soliton, gp, center=None)
    assert report.rhs == 0.0
    assert abs(report.lhs) < 1e-8


@pytest.mark.parametrize("center, drift", [(0.5, 0.0), (-2.0, 0.3)])
def test_virial_identity_with_tanh_weight(gp, soliton, center, drift):
    report = virial_identity_check(soliton, gp, center=center, rate=0.25, drift=drift)
    assert report.relative_mismatch < 1e-5
    assert abs(report.lhs) > 1e-4


def test_virial_identity_for_non_gross_pitaevskii(quartic, medium_grid):
    field = build_profile(quartic, 0.9, medium_grid).field + gaussian_pair(medium_grid, scale=0.02)
    assert virial_identity_check(field, quartic, center=1.0).relative_mismatch < 1e-5


def test_virial_identity_for_zero_field(gp, small_grid):
    report = virial_identity_check(FieldPair.zeros(small_grid), gp, center=0.0)
    assert report.lhs == 0.0
    assert report.rhs == pytest.approx(0.0, abs=1e-15)


def test_envelope_starts_at_zero_and_grows():
    t = np.linspace(0.0, 10.0, 11)
    env = monotonicity_envelope(t, L=20.0, sigma_star=0.1, tau0=0.1)
    assert env[0] == 0.0
    assert np.all(np.diff(env) > 0.0)


def test_monotonicity_of_synthetic_series():
    t = np.linspace(0.0, 10.0, 21)
    rising = np.column_stack([np.full_like(t, 0.3), 0.1 + 1e-4 * (1.0 - np.exp(-t))])
    report = monotonicity_report(t, rising, L=200.0, sigma_star=0.1, tau0=0.1, g_series=-1e-5 * t)
    assert report.passed
    assert report.g_passed
    assert report.p_tilde_1_drift == 0.0

    falling = rising.copy()
    falling[:, 1] = 0.1 - 1e-3 * t / 10.0
    report = monotonicity_report(t, falling, L=200.0, sigma_star=0.1, tau0=0.1)
    assert not report.passed
    assert report.entries[0].min_increment == pytest.approx(-1e-3)
    assert report.g_passed is None


def test_monotonicity_verdict_ignores_the_leakage_envelope():
    # at the default tau0 the envelope is in the thousands; the verdict must not use it
    t = np.linspace(0.0, 2.0, 11)
    nu_star = float(np.sqrt(2.0 - 1.2 ** 2))
    tau0 = nu_star / 16.0
    falling = np.column_stack([np.full_like(t, 0.3), 0.1 - 0.0427 * t / 2.0])

    report = monotonicity_report(t, falling, L=40.0, sigma_star=0.1, tau0=tau0, g_series=50.0 * t)

    assert report.entries[0].envelope > 1.0
    assert report.entries[0].within_envelope
    assert not report.entries[0].passed
    assert report.g_max_increase == pytest.approx(100.0)
    assert report.g_passed is False
    assert report.passed is False


def test_monotonicity_tolerates_increments_below_the_floor():
    t = np.linspace(0.0, 1.0, 6)
    wobble = np.column_stack([np.zeros_like(t), 5e-7 * np.sin(7.0 * t) - 5e-7 * t])
    report = monotonicity_report(t, wobble, L=40.0, sigma_star=0.1, tau0=0.25, g_series=4e-7 * t)
    assert report.passed
    assert report.g_passed


def test_stability_verdict_refuses_ill_ordered_speeds(gp):
    empty = TrackResult(fits=[], times=np.zeros(0), a_dot=np.zeros((0, 2)), c_dot=np.zeros((0, 2)))
    report = stability_report(empty, [], [1.2, 1.0], gp, alpha0=1e-3, L0=40.0, tau0=0.05)
    assert report.ordering_violation
    assert report.passed is None


def test_stability_for_static_snapshots(gp):
    grid = Grid(1024, 160.0)
    spec = ChainSpec((1.0, 1.2), (-20.0, 20.0))
    chain = build_chain(spec, gp, grid)
    fit = decompose(chain, spec, gp)
    result = TrackResult(fits=[fit, fit], times=np.array([0.0, 1.0]),
                         a_dot=np.array([[1.0, 1.2], [1.0, 1.2]]), c_dot=np.zeros((2, 2)))
    report = stability_report(result, [chain, chain], spec.speeds, gp, alpha0=1e-3, L0=40.0, tau0=0.05)
    assert not report.ordering_violation
    assert report.sup_distance == pytest.approx(0.0, abs=1e-12)
    assert report.sup_modulation_defect == pytest.approx(0.0, abs=1e-12)
    # gaps do not grow between identical snapshots
    assert report.min_gap_growth == pytest.approx(-0.9 * 0.2)
    assert report.passed is False


def test_alpha_halving_factor_window():
    entries = alpha_halving([1e-3, 2e-3, 4e-3], [1.1e-3, 2.0e-3, 9.0e-3])
    assert [(e.alpha_large, e.alpha_small) for e in entries] == [(2e-3, 1e-3), (4e-3, 2e-3)]
    assert entries[0].factor == pytest.approx(0.55)
    assert entries[0].passed
    assert entries[1].factor == pytest.approx(2.0 / 9.0)
    assert not entries[1].passed


def test_alpha_halving_skips_unpaired_and_missing_runs():
    assert alpha_halving([1e-3, 3e-3], [1e-3, 3e-3]) == []
    assert alpha_halving([0.0, 1e-3, 2e-3], [1e-9, None, 2e-3]) == []


def test_record_row(gp):
    grid = Grid(1024, 160.0)
    spec = ChainSpec((1.0, 1.2), (-20.0, 20.0))
    chain = build_chain(spec, gp, grid)
    fit = decompose(chain, spec, gp)
    cutoffs = build_cutoffs(spec.positions, L=30.0, tau=0.1, tau0=0.05, grid=grid)
    row = record(chain, 0.0, gp, cutoffs, spec.speeds, fit)
    assert row.p_tilde[0] == pytest.approx(row.p, abs=1e-12)
    assert row.c == pytest.approx(list(spec.speeds))
    assert row.eps_xnorm < 1e-12
    assert row.max_eta == pytest.approx(chain.max_eta)


def test_expansion_of_single_soliton_without_perturbation(gp, medium_grid):
    spec = ChainSpec((1.0,), (0.0,))
    cutoffs = build_cutoffs(spec.positions, L=20.0, tau=0.5, tau0=0.5, grid=medium_grid)
    report = expansion_check(spec, gp, medium_grid, FieldPair.zeros(medium_grid), cutoffs)
    assert report.energy_residual < 1e-12
    assert report.momentum_residual[0] < 1e-9
    assert report.g_gap == 0.0
    assert report.g_ratio is None


def test_expansion_of_perturbed_chain(gp):
    grid = Grid(1024, 160.0)
    spec = ChainSpec((1.0, 1.2), (-20.0, 20.0))
    terms = chain_derivatives(spec, gp, grid)
    raw = gaussian_pair(grid, center=-20.0, width=2.0, scale=1e-3) + gaussian_pair(
        grid, center=20.0, width=2.0, scale=1e-3
    )
    eps = project_orthogonal(raw, terms)
    cutoffs = build_cutoffs(spec.positions, L=30.0, tau=0.5, tau0=0.5, grid=grid)
    report = expansion_check(spec, gp, grid, eps, cutoffs)
    quad = report.eps_xnorm ** 2
    assert abs(report.first_order) < 1e-10
    assert report.energy_residual < 1e-2 * quad
    assert max(report.momentum_residual) < 1e-2 * quad
    assert report.g_gap > 0.0
    assert report.g_ratio > 0.0


def test_projection_removes_modulation_directions(gp):
    grid = Grid(1024, 160.0)
    spec = ChainSpec((1.0, 1.2), (-20.0, 20.0))
    terms = chain_derivatives(spec, gp, grid)
    eps = project_orthogonal(gaussian_pair(grid, center=-19.0, width=2.0), terms)
    for term in terms:
        assert abs(integrate(eps.eta * term.dx.eta + eps.v * term.dx.v, grid)) < 1e-14
        assert abs(integrate(eps.eta * term.q.v + eps.v * term.q.eta, grid)) < 1e-14


def test_taylor_remainder_is_cubic(gp, soliton):
    fit = taylor_remainder_check(soliton, gp, seed=2)
    assert fit.exponent >= 2.7


def test_momentum_hessian_bound(medium_grid):
    report = momentum_hessian_bound(medium_grid, draws=10)
    assert report.passed
    assert report.max_ratio <= 1.0


def test_energy_drift_of_identical_states(gp, soliton):
    assert energy_drift_check(soliton, soliton, gp) == (0.0, 0.0)


def test_virial_suite_on_random_fields_and_cutoffs(gp, medium_grid):
    base = build_profile(gp, 1.0, medium_grid).field
    report = virial_suite(base, gp, draws=10, seed=4)
    assert report.draws == 10
    assert report.max_relative_mismatch < 1e-5
    assert report.global_drift < 1e-8
    assert report.passed


def test_expansion_residuals_decay_with_separation(gp):
    grid = Grid(1024, 160.0)
    decay = expansion_tail_decay((1.0, 1.2), gp, grid, separations=(20.0, 30.0, 40.0), tau=0.5, tau0=0.25)
    assert decay.expected_rate == pytest.approx(0.125)
    assert all(b < a for a, b in zip(decay.momentum_residuals, decay.momentum_residuals[1:]))
    assert decay.energy_rate >= decay.expected_rate
    assert decay.momentum_rate >= decay.expected_rate
    assert decay.passed


def test_expansion_remainder_is_cubic(gp):
    grid = Grid(1024, 160.0)
    spec = ChainSpec((1.0, 1.2), (-20.0, 20.0))
    raw = gaussian_pair(grid, center=-20.0, width=2.0) + gaussian_pair(grid, center=20.0, width=2.0)
    eps = project_orthogonal(raw, chain_derivatives(spec, gp, grid))
    cutoffs = build_cutoffs(spec.positions, L=40.0, tau=0.5, tau0=0.5, grid=grid)

    fit = expansion_remainder_scaling(spec, gp, grid, (1.0 / x_norm(eps)) * eps, cutoffs)

    assert fit.exponent >= 2.7
    assert fit.values[0] > fit.values[-1] > 0.0


def test_modulation_matrix_check_on_perturbed_chain(gp):
    grid = Grid(1024, 160.0)
    spec = ChainSpec((1.0, 1.2), (-20.0, 20.0))
    field = build_chain(spec, gp, grid) + 1e-3 * smooth_perturbation(grid, seed=6, centers=spec.positions)
    fit = decompose(field, spec, gp)

    report = modulation_matrix_check(field, fit, gp)

    assert report.parity_defect < 1e-8
    assert report.dp_dc_defect < 1e-4
    assert report.h_scale == pytest.approx(fit.eps_xnorm, rel=0.05)
    assert 0.0 < report.h_norm <= 10.0 * report.h_scale
    assert report.passed
