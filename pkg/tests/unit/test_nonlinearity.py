import math

import numpy as np
import pytest
from scipy.integrate import quad

from darksol.core.exceptions import ConfigError, DefocusingViolated, H3Violated
from darksol.core.nonlinearity import (
    NonlinearityKind,
    check_hypotheses,
    cubic_quintic,
    f_tilde,
    from_spec,
    gross_pitaevskii,
    nc_poly,
    polynomial,
    sound_speed,
    transonic_constants,
)

pytestmark = pytest.mark.unit


def test_gross_pitaevskii_constants(gp):
    const = transonic_constants(gp)
    assert const.c_s == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert const.k == pytest.approx(-6.0)
    assert const.k_tilde == pytest.approx(0.5)


def test_primitive_and_derivatives(gp):
    rho = np.linspace(0.0, 3.0, 7)
    np.testing.assert_allclose(gp.f(rho), 1.0 - rho)
    np.testing.assert_allclose(gp.df(rho), -1.0)
    np.testing.assert_allclose(gp.F(rho), 0.5 * (1.0 - rho) ** 2)
    assert gp.F(1.0) == 0.0


def test_primitive_matches_quadrature(quartic):
    rho = 0.3
    value, _ = quad(quartic.f, rho, 1.0)
    assert float(quartic.F(rho)) == pytest.approx(value, rel=1e-12)


def test_trailing_zero_coefficients_are_dropped():
    assert polynomial((1.0, 0.5, 0.0, 0.0)) == polynomial((1.0, 0.5))
    assert hash(polynomial((1.0, 0.0))) == hash(polynomial((1.0,)))
    assert polynomial((1.0,)).degree == 1


def test_reduced_polynomial_at_zero(quartic):
    for c in (0.3, 1.0, 1.4):
        assert nc_poly(quartic, c)(0.0) == pytest.approx(c * c - 2.0)


def test_hypotheses_hold_for_gross_pitaevskii(gp):
    report = check_hypotheses(gp)
    assert report.passed
    assert report.entry("H2").scope == "verified on window"
    assert report.h2_fit["q"] == pytest.approx(2.0)


def test_hypotheses_hold_for_quartic_correction(quartic):
    report = check_hypotheses(quartic)
    assert report.passed
    assert report.entry("H3").passed


def test_h1_fails_for_one_minus_rho_squared():
    # f = 1 - rho^2: F = t^2 - t^3 / 3 with t = 1 - rho, below c_s^2 t^2 / 4 for rho < 1
    nl = polynomial((2.0, -1.0))
    report = check_hypotheses(nl)
    h1 = report.entry("H1")
    assert not h1.passed
    assert h1.violating_rho is not None and h1.violating_rho < 1.0
    assert not report.passed


def test_focusing_nonlinearity_is_rejected():
    nl = polynomial((-1.0,))
    with pytest.raises(DefocusingViolated):
        sound_speed(nl)
    report = check_hypotheses(nl)
    assert not report.entry("defocusing").passed


def test_h3_degeneracy_is_rejected():
    # f''(1) + 3 f'(1) = 2 b_2 - 3 b_1 = 0
    nl = polynomial((2.0, 3.0))
    with pytest.raises(H3Violated):
        transonic_constants(nl)
    assert not check_hypotheses(nl).entry("H3").passed


def test_scan_window_must_reach_two(gp):
    with pytest.raises(ConfigError):
        check_hypotheses(gp, rho_scan=(0.0, 1.5))


def test_flux_density_for_gross_pitaevskii(gp):
    rho = np.linspace(0.0, 0.9, 10)
    np.testing.assert_allclose(f_tilde(gp, rho), 0.5 * rho ** 2, atol=1e-15)


def test_from_spec_variants():
    assert from_spec({"kind": "gp"}).kind is NonlinearityKind.GROSS_PITAEVSKII
    assert from_spec({"kind": "poly_1mr", "coeffs": [1.0, 0.2]}).coeffs == (1.0, 0.2)
    assert from_spec({"kind": "cubic_quintic", "a": 0.3}) == cubic_quintic(0.3)
    with pytest.raises(ConfigError):
        from_spec({"kind": "poly_1mr"})
    with pytest.raises(ConfigError):
        from_spec({"kind": "saturable"})


def test_gross_pitaevskii_differs_from_equal_polynomial_by_kind():
    assert gross_pitaevskii().coeffs == polynomial((1.0,)).coeffs
    assert gross_pitaevskii().describe()["kind"] == "gp"
