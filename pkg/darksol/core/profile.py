"""
Dark-soliton profiles Q_c = (eta_c, v_c) from the first integral.

The peak amplitude xi_c is the first zero of N_c(x) = x^2 n_c(x) in (0, 1).
The profile solves -(eta')^2 = N_c(eta) and is integrated for x >= 0 in
three pieces:

* near the peak, in the variable s with eta = xi_c - s^2, which removes the
  square-root zero of N_c at xi_c;
* in y = ln(eta) down to eta = tail_floor;
* beyond that, as the exponential tail tail_floor * exp(-nu_c (x - x_tail)).

The result is kept as a continuous even representation (:class:`ProfileShape`)
so that translated profiles can be evaluated at sub-cell positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize

from darksol.config.settings import get_settings
from darksol.core.exceptions import GridTooSmall, NoZero, SolverFail
from darksol.core.field_ops import FieldPair, Grid, HydroField
from darksol.core.nonlinearity import Nonlinearity, nc_poly, sound_speed, transonic_constants
from darksol.utils.monitoring import get_logger, metrics

logger = get_logger(__name__)


@dataclass(frozen=True)
class NcPolynomial:
    """N_c(x) = c^2 x^2 - 4 (1 - x) F(1 - x), stored through n_c = N_c / x^2."""

    c: float
    reduced: Polynomial

    def value(self, x: np.ndarray | float) -> np.ndarray | float:
        return x * x * self.reduced(x)

    def derivative(self, x: np.ndarray | float) -> np.ndarray | float:
        return 2.0 * x * self.reduced(x) + x * x * self.reduced.deriv(1)(x)

    def second_derivative(self, x: np.ndarray | float) -> np.ndarray | float:
        r1 = self.reduced.deriv(1)
        r2 = self.reduced.deriv(2)
        return 2.0 * self.reduced(x) + 4.0 * x * r1(x) + x * x * r2(x)


def nc_polynomial(nl: Nonlinearity, c: float) -> NcPolynomial:
    return NcPolynomial(c=float(c), reduced=nc_poly(nl, c))


def nc_value(nl: Nonlinearity, c: float, x: np.ndarray | float) -> np.ndarray | float:
    return nc_polynomial(nl, c).value(x)


def nc_derivative(nl: Nonlinearity, c: float, x: np.ndarray | float) -> np.ndarray | float:
    return nc_polynomial(nl, c).derivative(x)


def nc_second_derivative(nl: Nonlinearity, c: float, x: np.ndarray | float) -> np.ndarray | float:
    return nc_polynomial(nl, c).second_derivative(x)


def speed_nu(nl: Nonlinearity, c: float) -> float:
    """Tail rate from the vacuum linearization: nu_c^2 = -N_c''(0) / 2."""
    return math.sqrt(max(-0.5 * float(nc_second_derivative(nl, c, 0.0)), 0.0))


def find_xi(nl: Nonlinearity, c: float) -> float:
    """Smallest zero of N_c in (0, 1), bracketed on a uniform scan then refined."""
    solver = get_settings().solver
    c_s = sound_speed(nl)
    if not 0.0 < c < c_s:
        raise NoZero("speed must lie in (0, c_s)", c=c, c_s=c_s)
    n_c = nc_poly(nl, c)
    # n_c(0) = c^2 - c_s^2 < 0, so x = 0 can open the scan
    nodes = np.linspace(0.0, 1.0 - 1e-9, solver.xi_scan_points)
    values = n_c(nodes)
    positive = np.flatnonzero(values >= 0.0)
    if positive.size == 0:
        raise NoZero("N_c keeps a constant sign on (0, 1)", c=c)
    j = int(positive[0])
    if values[j] == 0.0:
        xi = float(nodes[j])
    else:
        xi = float(optimize.brentq(n_c, nodes[j - 1], nodes[j], xtol=solver.xi_tol, rtol=4 * np.finfo(float).eps))
    if not float(n_c.deriv(1)(xi)) > 0.0:
        raise NoZero("N_c has a degenerate zero", c=c, xi=xi)
    return xi


def xi_derivative(nl: Nonlinearity, c: float) -> float:
    """d xi_c / dc = -2 c xi_c^2 / N_c'(xi_c)."""
    xi = find_xi(nl, c)
    return -2.0 * c * xi * xi / float(nc_polynomial(nl, c).derivative(xi))


def _horner(coefs: tuple[float, ...], x: float) -> float:
    total = 0.0
    for coef in reversed(coefs):
        total = total * x + coef
    return total


def _peak_quotient(nl: Nonlinearity, c: float, xi: float) -> Polynomial:
    """rho with -n_c(xi - u) = u rho(u)."""
    shifted = nc_poly(nl, c)(Polynomial([xi, -1.0]))
    return Polynomial(-shifted.coef[1:])


class ShapeSamples(NamedTuple):
    eta: np.ndarray
    deta: np.ndarray
    d2eta: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray

    def field(self, grid: Grid) -> FieldPair:
        return FieldPair(self.eta, self.v, grid)

    def dx_field(self, grid: Grid) -> FieldPair:
        return FieldPair(self.deta, self.dv, grid)

    def dxx_field(self, grid: Grid) -> FieldPair:
        return FieldPair(self.d2eta, self.d2v, grid)


@dataclass(frozen=True, eq=False)
class ProfileShape:
    """Continuous even soliton profile centered at 0."""

    nl: Nonlinearity
    c: float
    xi: float
    nu: float
    tail_floor: float
    x_switch: float
    x_tail: float
    peak_sol: integrate.OdeSolution = field(repr=False)
    log_sol: integrate.OdeSolution = field(repr=False)
    quotient: Polynomial = field(repr=False)
    n_c: Polynomial = field(repr=False)

    def _eta_and_slope(self, ax: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """eta and eta' for ax >= 0."""
        eta = np.empty_like(ax)
        slope = np.empty_like(ax)
        peak = ax <= self.x_switch
        bulk = (ax > self.x_switch) & (ax <= self.x_tail)
        tail = ax > self.x_tail
        if np.any(peak):
            s = self.peak_sol(ax[peak])[0]
            eta[peak] = self.xi - s * s
            slope[peak] = -eta[peak] * s * np.sqrt(np.clip(self.quotient(s * s), 0.0, None))
        if np.any(bulk):
            eta[bulk] = np.exp(self.log_sol(ax[bulk])[0])
            slope[bulk] = -eta[bulk] * np.sqrt(np.clip(-self.n_c(eta[bulk]), 0.0, None))
        if np.any(tail):
            eta[tail] = self.tail_floor * np.exp(-self.nu * (ax[tail] - self.x_tail))
            slope[tail] = -self.nu * eta[tail]
        return eta, slope

    def eta(self, x: np.ndarray | float) -> np.ndarray:
        ax = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
        return self._eta_and_slope(ax)[0]

    def sample(self, x: np.ndarray | float) -> ShapeSamples:
        """Profile values and first two x-derivatives at arbitrary points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        eta, slope = self._eta_and_slope(np.abs(x))
        deta = np.sign(x) * slope
        d2eta = -0.5 * np.asarray(NcPolynomial(self.c, self.n_c).derivative(eta))
        rho = 1.0 - eta
        c = self.c
        v = c * eta / (2.0 * rho)
        dv = c * deta / (2.0 * rho ** 2)
        d2v = c * (d2eta * rho + 2.0 * deta ** 2) / (2.0 * rho ** 3)
        return ShapeSamples(eta, deta, d2eta, v, dv, d2v)


def _shape_key() -> tuple[float, ...]:
    solver = get_settings().solver
    return (solver.xi_scan_points, solver.xi_tol, solver.ode_rtol, solver.ode_atol, solver.tail_floor_ratio)


def profile_shape(nl: Nonlinearity, c: float) -> ProfileShape:
    """Integrate the profile ODE once per (nonlinearity, speed, solver tolerances)."""
    return _cached_shape(nl, float(c), _shape_key())


@lru_cache(maxsize=512)
def _cached_shape(nl: Nonlinearity, c: float, key: tuple[float, ...]) -> ProfileShape:
    solver = get_settings().solver
    xi = find_xi(nl, c)
    nu = speed_nu(nl, c)
    n_c = nc_poly(nl, c)
    quotient = _peak_quotient(nl, c, xi)
    tail_floor = solver.tail_floor_ratio * xi
    span = (0.0, 1e3 + 200.0 / nu)
    q_coefs = tuple(float(x) for x in quotient.coef)
    n_coefs = tuple(float(x) for x in n_c.coef)

    def peak_rhs(_x: float, s: np.ndarray) -> np.ndarray:
        u = s[0] * s[0]
        return np.array([0.5 * (xi - u) * math.sqrt(max(_horner(q_coefs, u), 0.0))])

    def half_amplitude(_x: float, s: np.ndarray) -> float:
        return s[0] * s[0] - 0.5 * xi

    half_amplitude.terminal = True  # type: ignore[attr-defined]
    half_amplitude.direction = 1  # type: ignore[attr-defined]

    peak = integrate.solve_ivp(
        peak_rhs, span, [0.0], method="DOP853", rtol=solver.ode_rtol,
        atol=solver.ode_atol, dense_output=True, events=half_amplitude,
    )
    if peak.status != 1 or not peak.t_events[0].size:
        metrics.increment_profile_builds("failed")
        raise SolverFail("peak integration did not reach half amplitude", c=c, message=peak.message)
    x_switch = float(peak.t_events[0][0])

    def log_rhs(_x: float, y: np.ndarray) -> np.ndarray:
        return np.array([-math.sqrt(max(-_horner(n_coefs, math.exp(y[0])), 0.0))])

    log_floor = math.log(tail_floor)

    def floor_reached(_x: float, y: np.ndarray) -> float:
        return y[0] - log_floor

    floor_reached.terminal = True  # type: ignore[attr-defined]
    floor_reached.direction = -1  # type: ignore[attr-defined]

    bulk = integrate.solve_ivp(
        log_rhs, (x_switch, x_switch + span[1]), [math.log(0.5 * xi)], method="DOP853",
        rtol=solver.ode_rtol, atol=solver.ode_atol, dense_output=True, events=floor_reached,
    )
    if bulk.status != 1 or not bulk.t_events[0].size:
        metrics.increment_profile_builds("failed")
        raise SolverFail("bulk integration did not reach the tail floor", c=c, message=bulk.message)
    x_tail = float(bulk.t_events[0][0])

    metrics.increment_profile_builds("ok")
    logger.debug("profile integrated", c=c, xi=xi, nu=nu, x_switch=x_switch, x_tail=x_tail)
    return ProfileShape(
        nl=nl, c=c, xi=xi, nu=nu, tail_floor=tail_floor, x_switch=x_switch,
        x_tail=x_tail, peak_sol=peak.sol, log_sol=bulk.sol, quotient=quotient, n_c=n_c,
    )


@dataclass(frozen=True, eq=False)
class SolitonProfile:
    """A soliton Q_c sampled on a grid, centered at x = 0."""

    c: float
    xi_c: float
    nu_c: float
    grid: Grid
    eta: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    tail_floor: float
    shape: ProfileShape = field(repr=False)

    @property
    def field(self) -> HydroField:
        return HydroField(self.eta, self.v, self.grid)

    def samples(self, center: float = 0.0) -> ShapeSamples:
        return self.shape.sample(self.grid.wrap(self.grid.x - center))

    @property
    def boundary_value(self) -> float:
        return float(max(abs(self.eta[0]), abs(self.eta[-1])))


def boundary_tolerance(shape: ProfileShape) -> float:
    """Largest admissible |eta_c| at the domain edge: 10 xi_c e^{-10}."""
    return 10.0 * shape.xi * math.exp(-10.0)


def build_profile(nl: Nonlinearity, c: float, grid: Grid) -> SolitonProfile:
    """Sample Q_c on ``grid``; the residual at the domain edge must be negligible."""
    shape = profile_shape(nl, float(c))
    edges = shape.eta(np.array([grid.x[0], grid.x[-1]]))
    boundary = float(np.max(np.abs(edges)))
    tolerance = boundary_tolerance(shape)
    if boundary > tolerance:
        raise GridTooSmall(
            "profile does not decay to the boundary tolerance inside the grid",
            halflength=grid.halflength, boundary=boundary, tolerance=tolerance,
        )
    bound = delta_lower_bound(nl, shape.c)
    if 1.0 - shape.xi < bound * (1.0 - 1e-9):
        logger.warning("peak density below the explicit lower bound", c=shape.c, density=1.0 - shape.xi, bound=bound)
    samples = shape.sample(grid.x)
    return SolitonProfile(
        c=shape.c, xi_c=shape.xi, nu_c=shape.nu, grid=grid, eta=samples.eta,
        v=samples.v, tail_floor=shape.tail_floor, shape=shape,
    )


def fd_step(nl: Nonlinearity, c: float, h: Optional[float] = None) -> float:
    if h is not None:
        return h
    return get_settings().solver.fd_step_ratio * (sound_speed(nl) - c)


def _check_step(nl: Nonlinearity, c: float, h: float, c0_hint: float) -> None:
    c_s = sound_speed(nl)
    if not (max(c0_hint, 0.0) < c - h and c + h < c_s):
        raise NoZero("speed stencil leaves the admissible range", c=c, h=h, c0_hint=c0_hint, c_s=c_s)


def c_derivative_samples(
    nl: Nonlinearity, c: float, x: np.ndarray, h: Optional[float] = None, c0_hint: float = 0.0
) -> ShapeSamples:
    """Central speed differences of every sampled quantity at points ``x``."""
    h = fd_step(nl, c, h)
    _check_step(nl, c, h, c0_hint)
    plus = profile_shape(nl, c + h).sample(x)
    minus = profile_shape(nl, c - h).sample(x)
    return ShapeSamples(*((p - m) / (2.0 * h) for p, m in zip(plus, minus)))


def profile_c_derivative(
    nl: Nonlinearity, c: float, grid: Grid, h: Optional[float] = None, c0_hint: float = 0.0
) -> FieldPair:
    """(d eta_c / dc, d v_c / dc) on the grid."""
    samples = c_derivative_samples(nl, c, grid.x, h, c0_hint)
    return FieldPair(samples.eta, samples.v, grid)


def soliton_momentum(nl: Nonlinearity, c: float) -> float:
    """p(Q_c) = (c/2) int_0^xi x^2 / ((1-x) sqrt(-N_c(x))) dx, with x = xi - s^2."""
    xi = find_xi(nl, c)
    quotient = _peak_quotient(nl, c, xi)

    def integrand(s: float) -> float:
        u = s * s
        return c * (xi - u) / ((1.0 - xi + u) * math.sqrt(float(quotient(u))))

    value, _ = integrate.quad(integrand, 0.0, math.sqrt(xi), epsabs=0.0, epsrel=1e-13, limit=200)
    return float(value)


def momentum_derivative(nl: Nonlinearity, c: float, h: Optional[float] = None, c0_hint: float = 0.0) -> float:
    """Central difference of :func:`soliton_momentum` in c."""
    h = fd_step(nl, c, h)
    _check_step(nl, c, h, c0_hint)
    return (soliton_momentum(nl, c + h) - soliton_momentum(nl, c - h)) / (2.0 * h)


def split_term_ii(nl: Nonlinearity, c: float) -> float:
    """II_c = c xi^(5/2) / ((1 - xi) sqrt(N_c'(xi)))."""
    xi = find_xi(nl, c)
    return c * xi ** 2.5 / ((1.0 - xi) * math.sqrt(float(nc_polynomial(nl, c).derivative(xi))))


def delta_lower_bound(nl: Nonlinearity, c: float) -> float:
    """Explicit lower bound for |u_c(0)|^2 = 1 - xi_c."""
    c_s = sound_speed(nl)
    rho = np.linspace(0.0, 2.0, 2001)
    sup_d2f = float(np.max(np.abs(nl.d2f(rho))))
    return (c * c) / (c_s * c_s) / (1.0 + sup_d2f / (4.0 * c_s * c_s))


def transonic_ratios(nl: Nonlinearity, c: float) -> dict[str, float]:
    """Ratios that tend to 1 as c -> c_s."""
    const = transonic_constants(nl)
    nu = speed_nu(nl, c)
    xi = find_xi(nl, c)
    k2 = const.k ** 2
    return {
        "nu": nu,
        "xi": xi / (const.k_tilde * nu ** 2),
        "momentum": soliton_momentum(nl, c) * k2 / (6.0 * const.c_s * nu ** 3),
        "momentum_derivative": momentum_derivative(nl, c) / (-18.0 * const.c_s ** 2 * nu / k2),
        "split_term": split_term_ii(nl, c) / (const.c_s * const.k_tilde ** 2 * nu ** 3),
    }


def fitted_decay_rate(shape: ProfileShape, lo: float = 6.0, hi: float = 9.0) -> float:
    """Least-squares decay rate of eta_c on [lo / nu_c, hi / nu_c]."""
    x = np.linspace(lo / shape.nu, hi / shape.nu, 400)
    slope, _ = np.polyfit(x, np.log(shape.eta(x)), 1)
    return float(-slope)
