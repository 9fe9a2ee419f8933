"""
Checks of the conservation, monotonicity, virial, expansion and stability
properties of computed fields. Every check returns a pydantic report and
records its verdict in the metrics registry.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from darksol.core.evolution import rk4_step
from darksol.core.field_ops import (
    FieldPair,
    Grid,
    derivative,
    energy,
    grad_energy,
    hessian_momentum_apply,
    inner,
    integrate,
    momentum,
    quadratic_form_direct,
    require_nonvacuum,
    x_norm,
)
from darksol.core.localization import (
    CutoffFamily,
    build_cutoffs,
    default_rates,
    functional_G,
    localized_momentum,
    tanh_step,
    tilde_momentum,
)
from darksol.core.modulation import (
    ChainSpec,
    ModulationFit,
    SolitonTerm,
    TrackResult,
    build_chain,
    chain_derivatives,
    modulation_matrix,
)
from darksol.core.nonlinearity import Nonlinearity, f_tilde
from darksol.core.profile import momentum_derivative, profile_shape, soliton_momentum
from darksol.utils.monitoring import get_logger, metrics

logger = get_logger(__name__)


class DiagnosticsRecord(BaseModel):
    """One row of the diagnostics time series."""

    t: float
    E: float
    p: float
    p_tilde: list[float]
    G: float
    eps_xnorm: float
    c: list[float]
    a: list[float]
    max_eta: float


def record(
    field: FieldPair,
    t: float,
    nl: Nonlinearity,
    cutoffs: CutoffFamily,
    c_star: Sequence[float],
    fit: ModulationFit,
) -> DiagnosticsRecord:
    require_nonvacuum(field)
    return DiagnosticsRecord(
        t=t,
        E=energy(field, nl),
        p=momentum(field),
        p_tilde=[tilde_momentum(field, cutoffs, k) for k in range(1, cutoffs.N + 1)],
        G=functional_G(field, nl, c_star, cutoffs),
        eps_xnorm=fit.eps_xnorm,
        c=[float(c) for c in fit.speeds],
        a=[float(a) for a in fit.positions],
        max_eta=field.max_eta,
    )


def smooth_perturbation(
    grid: Grid,
    seed: int = 0,
    centers: Sequence[float] = (0.0,),
    width: float = 10.0,
    modes: int = 6,
) -> FieldPair:
    """Random smooth localized perturbation with ||eps||_X = 1."""
    rng = np.random.default_rng(seed)
    x = grid.x
    eta = np.zeros(grid.n)
    v = np.zeros(grid.n)
    for center in centers:
        envelope = np.exp(-(((x - center) / width) ** 2))
        for j in range(1, modes + 1):
            k = j / width
            for target in (eta, v):
                a, b = rng.standard_normal(2) / j
                target += envelope * (a * np.cos(k * (x - center)) + b * np.sin(k * (x - center)))
    pair = FieldPair(eta, v, grid)
    return (1.0 / x_norm(pair)) * pair


def _check(name: str, passed: bool) -> bool:
    metrics.record_check(name, passed)
    return passed


# virial identity


class VirialReport(BaseModel):
    lhs: float
    rhs: float
    mismatch: float
    relative_mismatch: float


def virial_flux(
    field: FieldPair,
    nl: Nonlinearity,
    chi: np.ndarray,
    d_chi: np.ndarray,
    d3_chi: np.ndarray,
    dt_chi: Optional[np.ndarray] = None,
) -> float:
    """Right-hand side of d/dt int chi eta v written with x-derivatives of chi only."""
    require_nonvacuum(field)
    grid = field.grid
    eta, v = field.eta, field.v
    rho = 1.0 - eta
    d_eta = derivative(eta, grid, 1)
    bulk = (1.0 - 2.0 * eta) * v * v + f_tilde(nl, eta) + (3.0 - 2.0 * eta) * d_eta ** 2 / (4.0 * rho ** 2)
    total = integrate(d_chi * bulk, grid) + 0.5 * integrate(d3_chi * (eta + np.log(rho)), grid)
    if dt_chi is not None:
        total += integrate(dt_chi * eta * v, grid)
    return total


def virial_identity_check(
    field: FieldPair,
    nl: Nonlinearity,
    center: Optional[float] = None,
    rate: float = 0.25,
    drift: float = 0.0,
    dt: float = 1e-4,
) -> VirialReport:
    """Compare a centered time difference of int chi eta v with its flux form.

    chi(x, t) = (1 + tanh(rate (x - center - drift t))) / 2, or chi = 1 when
    ``center`` is None.
    """
    grid = field.grid
    x = grid.x

    def weighted(pair: FieldPair, t: float) -> float:
        if center is None:
            return integrate(pair.eta * pair.v, grid)
        return integrate(tanh_step(x, center + drift * t, rate) * pair.eta * pair.v, grid)

    forward = rk4_step(field, nl, dt)
    backward = rk4_step(field, nl, -dt)
    lhs = (weighted(forward, dt) - weighted(backward, -dt)) / (2.0 * dt)

    if center is None:
        rhs_value = 0.0
    else:
        d_chi = tanh_step(x, center, rate, 1)
        rhs_value = virial_flux(field, nl, tanh_step(x, center, rate), d_chi,
                                tanh_step(x, center, rate, 3), dt_chi=-drift * d_chi)
    mismatch = abs(lhs - rhs_value)
    rel = mismatch / (abs(lhs) + abs(rhs_value) + 1.0)
    _check("virial_identity", rel < 1e-5)
    return VirialReport(lhs=lhs, rhs=rhs_value, mismatch=mismatch, relative_mismatch=rel)


class VirialSuiteReport(BaseModel):
    draws: int
    max_relative_mismatch: float
    global_drift: float = Field(description="|d/dt int eta v| for the weight chi = 1")
    passed: bool


def virial_suite(
    base: FieldPair, nl: Nonlinearity, draws: int = 10, seed: int = 0, amplitude: float = 1e-2
) -> VirialSuiteReport:
    """Virial identity on ``draws`` random perturbations of ``base`` with random tanh weights."""
    grid = base.grid
    rng = np.random.default_rng(seed)
    reach = 0.5 * grid.halflength
    worst = 0.0
    drift = 0.0
    for j in range(draws):
        bump = smooth_perturbation(grid, seed=seed + j, centers=(rng.uniform(-reach, reach),), width=5.0)
        field = base + amplitude * bump
        report = virial_identity_check(
            field, nl, center=rng.uniform(-reach, reach), rate=rng.uniform(0.1, 0.5), drift=rng.uniform(-1.0, 1.0),
        )
        worst = max(worst, report.relative_mismatch)
        if j == 0:
            drift = abs(virial_identity_check(field, nl, center=None).lhs)
    passed = worst < 1e-5 and drift < 1e-8
    return VirialSuiteReport(draws=draws, max_relative_mismatch=worst, global_drift=drift,
                             passed=_check("virial_suite", passed))


# monotonicity of the localized momenta


class MonotonicityEntry(BaseModel):
    k: int
    min_increment: float
    envelope: float
    within_envelope: bool
    fitted_rate: Optional[float]
    slow_decay: bool
    passed: bool


class MonotonicityReport(BaseModel):
    entries: list[MonotonicityEntry]
    p_tilde_1_drift: float
    g_max_increase: Optional[float]
    g_passed: Optional[bool]
    passed: bool


def monotonicity_envelope(
    t: np.ndarray, L: float, sigma_star: float, tau0: float,
    constant: float = 1.0, a: float = 1.0, safety: float = 10.0,
) -> np.ndarray:
    """Time integral of C L exp(-a tau0 (L - 1 + sigma* s)) over [0, t], times ``safety``."""
    rate = a * tau0 * sigma_star
    head = constant * L * math.exp(-a * tau0 * (L - 1.0))
    if rate <= 0.0 or not math.isfinite(rate):
        return safety * head * np.asarray(t, dtype=float)
    return safety * head * (-np.expm1(-rate * np.asarray(t, dtype=float))) / rate


def _decrement_rate(times: np.ndarray, series: np.ndarray) -> Optional[float]:
    """Fitted exponential decay rate of the negative part of d/dt series."""
    if times.size < 4:
        return None
    slope = -np.gradient(series, times)
    mask = slope > 1e-300
    if np.count_nonzero(mask) < 3:
        return None
    fit, _ = np.polyfit(times[mask], np.log(slope[mask]), 1)
    return float(-fit)


def monotonicity_report(
    times: Sequence[float],
    p_tilde: np.ndarray,
    L: float,
    sigma_star: float,
    tau0: float,
    g_series: Optional[Sequence[float]] = None,
    floor: float = 1e-6,
    safety: float = 10.0,
) -> MonotonicityReport:
    """Almost-monotonicity of p~_k (k >= 2) and of G along a tracked run.

    The verdicts use the absolute ``floor``. The integrated leakage envelope
    is reported next to them but never loosens a verdict.
    """
    t = np.asarray(times, dtype=float) - float(times[0])
    series = np.asarray(p_tilde, dtype=float)
    envelope = monotonicity_envelope(t, L, sigma_star, tau0, safety=safety)
    entries = []
    for k in range(2, series.shape[1] + 1):
        increment = series[:, k - 1] - series[0, k - 1]
        rate = _decrement_rate(t, series[:, k - 1])
        slow = rate is not None and rate < 0.5 * tau0 * sigma_star
        passed = bool(np.min(increment) >= -floor)
        entries.append(MonotonicityEntry(
            k=k, min_increment=float(np.min(increment)), envelope=float(envelope[-1]),
            within_envelope=bool(np.min(increment + envelope) >= -floor),
            fitted_rate=rate, slow_decay=slow, passed=_check(f"monotonicity_p{k}", passed),
        ))
        if slow:
            logger.warning("slow envelope decay", k=k, rate=rate, expected=tau0 * sigma_star)
    p1 = series[:, 0]
    drift = float(np.max(np.abs(p1 - p1[0])))
    g_increase: Optional[float] = None
    g_passed: Optional[bool] = None
    if g_series is not None:
        g = np.asarray(g_series, dtype=float)
        g_increase = float(np.max(g - g[0]))
        g_passed = _check("monotonicity_G", g_increase <= floor)
    passed = all(e.passed for e in entries) and g_passed is not False
    return MonotonicityReport(entries=entries, p_tilde_1_drift=drift, g_max_increase=g_increase,
                              g_passed=g_passed, passed=passed)


# orbital stability


class StabilityReport(BaseModel):
    ordering_violation: bool
    sup_distance: Optional[float] = None
    reference: Optional[float] = None
    ratio: Optional[float] = None
    sup_modulation_defect: Optional[float] = None
    min_gap_growth: Optional[float] = Field(default=None, description="min_t gap(t) - gap(0) - 0.9 sigma* t")
    passed: Optional[bool] = None


def stability_report(
    track_result: TrackResult,
    fields: Sequence[FieldPair],
    c_star: Sequence[float],
    nl: Nonlinearity,
    alpha0: float,
    L0: float,
    tau0: float,
    bound_factor: float = 10.0,
) -> StabilityReport:
    """sup_t ||Q(t) - R_{c*, a(t)}||_X against alpha0 + exp(-tau0 L0 / 2)."""
    speeds = np.asarray(c_star, dtype=float)
    if speeds.size > 1 and np.any(np.diff(speeds) <= 0.0):
        logger.warning("stability verdict skipped for an ill-ordered chain", speeds=list(speeds))
        return StabilityReport(ordering_violation=True)
    distances = []
    for fit, snapshot in zip(track_result.fits, fields):
        reference = build_chain(ChainSpec(tuple(speeds), tuple(fit.positions)), nl, snapshot.grid)
        distances.append(x_norm(snapshot - reference))
    sup = max(distances) if distances else math.nan
    scale = alpha0 + math.exp(-0.5 * tau0 * L0)
    speeds_t = np.stack([f.speeds for f in track_result.fits]) if track_result.fits else np.zeros((0, speeds.size))
    defect = np.abs(track_result.a_dot - speeds_t).sum(axis=1) + np.abs(track_result.c_dot).sum(axis=1)
    gap_growth: Optional[float] = None
    if speeds.size > 1 and track_result.fits:
        positions = np.stack([f.positions for f in track_result.fits])
        gaps = np.min(np.diff(positions, axis=1), axis=1)
        sigma = float(np.min(np.diff(speeds)))
        t = track_result.times - track_result.times[0]
        gap_growth = float(np.min(gaps - gaps[0] - 0.9 * sigma * t))
    passed = track_result.completed and sup <= bound_factor * scale
    if gap_growth is not None:
        passed = passed and gap_growth >= -1e-6
    return StabilityReport(
        ordering_violation=False,
        sup_distance=sup,
        reference=scale,
        ratio=sup / scale,
        sup_modulation_defect=float(defect.max()) if defect.size else None,
        min_gap_growth=gap_growth,
        passed=_check("orbital_stability", bool(passed)),
    )


class AlphaScaling(BaseModel):
    alpha_large: float
    alpha_small: float
    sup_large: float
    sup_small: float
    factor: float = Field(description="sup distance at alpha0 / 2 over sup distance at alpha0")
    passed: bool


def alpha_halving(
    alphas: Sequence[float], sups: Sequence[Optional[float]], window: tuple[float, float] = (0.3, 0.8)
) -> list[AlphaScaling]:
    """Pairs of runs whose alpha0 differ by a factor 2, with the resulting sup-distance factor."""
    out = []
    runs = [(a, s) for a, s in zip(alphas, sups) if a > 0.0 and s is not None and s > 0.0]
    for alpha_large, sup_large in runs:
        for alpha_small, sup_small in runs:
            if not math.isclose(alpha_large, 2.0 * alpha_small, rel_tol=1e-9):
                continue
            factor = sup_small / sup_large
            passed = window[0] <= factor <= window[1]
            out.append(AlphaScaling(
                alpha_large=alpha_large, alpha_small=alpha_small, sup_large=sup_large,
                sup_small=sup_small, factor=factor, passed=_check("alpha_halving", passed),
            ))
    return out


# second-order expansions of E and p_k around a chain


class ExpansionReport(BaseModel):
    energy_actual: float
    energy_predicted: float
    energy_residual: float
    momentum_actual: list[float]
    momentum_predicted: list[float]
    momentum_residual: list[float]
    first_order: float
    eps_xnorm: float
    g_gap: float = Field(description="G(R + eps) - G(R)")
    g_ratio: Optional[float] = Field(default=None, description="g_gap / ||eps||_X^2")


def project_orthogonal(eps: FieldPair, terms: Sequence[SolitonTerm]) -> FieldPair:
    """L^2 projection of eps onto the orthogonal of span{d_x Q_k, grad p(Q_k)}."""
    directions = []
    for term in terms:
        directions.append(term.dx)
        directions.append(FieldPair(0.5 * term.q.v, 0.5 * term.q.eta, term.q.grid))
    gram = np.array([[inner(a, b) for b in directions] for a in directions])
    rhs_vec = np.array([inner(d, eps) for d in directions])
    coef = np.linalg.solve(gram, rhs_vec)
    out = eps
    for c, d in zip(coef, directions):
        out = out - c * d
    return out


def _windowed(eps: FieldPair, window: np.ndarray) -> FieldPair:
    root = np.sqrt(np.clip(window, 0.0, None))
    return FieldPair(root * eps.eta, root * eps.v, eps.grid)


def expansion_check(
    spec: ChainSpec, nl: Nonlinearity, grid: Grid, eps: FieldPair, cutoffs: CutoffFamily
) -> ExpansionReport:
    """E(R + eps) and p_k(R + eps) against their quadratic expansions around single solitons."""
    chain = build_chain(spec, nl, grid)
    terms = chain_derivatives(spec, nl, grid)
    perturbed = chain + eps
    zero = FieldPair.zeros(grid)

    e_single = [energy(t.q, nl) for t in terms]
    quad = 0.0
    for k, term in enumerate(terms, start=1):
        quad += quadratic_form_direct(term.q, _windowed(eps, cutoffs.phi(k)), nl)
    for k in range(0, cutoffs.N + 1):
        quad += quadratic_form_direct(zero, _windowed(eps, cutoffs.phi_pair(k)), nl)
    e_pred = sum(e_single) + 0.5 * quad
    e_actual = energy(perturbed, nl)

    p_actual, p_pred = [], []
    for k, term in enumerate(terms, start=1):
        window = cutoffs.chi_window(k)
        local = _windowed(eps, cutoffs.phi(k))
        second = integrate(local.eta * local.v, grid)
        for j in (k - 1, k):
            pair = _windowed(eps, cutoffs.phi_pair(j))
            second += integrate(pair.eta * pair.v * window, grid)
        p_pred.append(soliton_momentum(nl, term.c) + 0.5 * second)
        p_actual.append(localized_momentum(perturbed, cutoffs, k))

    eps_norm = x_norm(eps)
    g_gap = functional_G(perturbed, nl, spec.speeds, cutoffs) - functional_G(chain, nl, spec.speeds, cutoffs)
    return ExpansionReport(
        energy_actual=e_actual,
        energy_predicted=e_pred,
        energy_residual=abs(e_actual - e_pred),
        momentum_actual=p_actual,
        momentum_predicted=p_pred,
        momentum_residual=[abs(a - b) for a, b in zip(p_actual, p_pred)],
        first_order=inner(grad_energy(chain, nl), eps),
        eps_xnorm=eps_norm,
        g_gap=g_gap,
        g_ratio=g_gap / eps_norm ** 2 if eps_norm > 0.0 else None,
    )


class ModulationMatrixReport(BaseModel):
    parity_defect: float = Field(description="max |D[k, k+N]|, |D[k+N, k]|")
    dp_dc_defect: float = Field(description="max_k |D[k+N, k+N] + dp/dc(c_k)| / |dp/dc(c_k)|")
    h_norm: float
    h_scale: float = Field(description="||eps||_X + L exp(-nu* L / 2)")
    passed: bool


def modulation_matrix_check(
    field: FieldPair, fit: ModulationFit, nl: Nonlinearity, constant: float = 10.0
) -> ModulationMatrixReport:
    """Structure of M = D + H at a converged decomposition."""
    matrices = modulation_matrix(field, fit, nl)
    n = fit.spec.N
    D = matrices.D
    parity = max(max(abs(D[k, k + n]), abs(D[k + n, k])) for k in range(n))
    defects = []
    for k, c in enumerate(fit.speeds):
        dp = momentum_derivative(nl, float(c))
        defects.append(abs(D[k + n, k + n] + dp) / abs(dp))
    nu_star = min(profile_shape(nl, float(c)).nu for c in fit.speeds)
    scale = fit.eps_xnorm
    if n > 1:
        L = float(np.min(np.diff(fit.positions)))
        scale += L * math.exp(-0.5 * nu_star * L)
    h_norm = float(np.linalg.norm(matrices.H, 2))
    passed = parity < 1e-8 and max(defects) < 1e-4 and h_norm <= constant * scale
    return ModulationMatrixReport(
        parity_defect=float(parity), dp_dc_defect=float(max(defects)), h_norm=h_norm, h_scale=scale,
        passed=_check("modulation_matrix", passed),
    )


class ScalingFit(BaseModel):
    scales: list[float]
    values: list[float]
    exponent: float


def taylor_remainder_check(
    base: FieldPair,
    nl: Nonlinearity,
    seed: int = 0,
    scales: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
    direction: Optional[FieldPair] = None,
) -> ScalingFit:
    """Exponent of |E(R + s e) - E(R) - s dE.e - s^2/2 d2E(e, e)| in s."""
    if direction is None:
        direction = smooth_perturbation(base.grid, seed=seed)
    e0 = energy(base, nl)
    first = inner(grad_energy(base, nl), direction)
    second = quadratic_form_direct(base, direction, nl)
    values = []
    for s in scales:
        values.append(abs(energy(base + s * direction, nl) - e0 - s * first - 0.5 * s * s * second))
    slope, _ = np.polyfit(np.log(scales), np.log(values), 1)
    return ScalingFit(scales=list(scales), values=values, exponent=float(slope))


class ExpansionDecay(BaseModel):
    separations: list[float]
    energy_residuals: list[float]
    momentum_residuals: list[float] = Field(description="max_k |p_k(R) - p(Q_k)| per separation")
    energy_rate: float
    momentum_rate: float
    expected_rate: float = Field(description="min(nu*, tau0) / 2")
    passed: bool


def _log_slope(separations: Sequence[float], values: Sequence[float], floor: float = 1e-18) -> float:
    slope, _ = np.polyfit(np.asarray(separations, dtype=float), np.log(np.maximum(values, floor)), 1)
    return float(-slope)


def expansion_tail_decay(
    speeds: Sequence[float],
    nl: Nonlinearity,
    grid: Grid,
    separations: Sequence[float] = (40.0, 60.0, 80.0),
    tau: Optional[float] = None,
    tau0: Optional[float] = None,
) -> ExpansionDecay:
    """Unperturbed chains: the E and p_k expansion residuals must decay in the separation."""
    nu_star = min(profile_shape(nl, c).nu for c in speeds)
    default_tau, default_tau0 = default_rates(nu_star)
    tau = tau or default_tau
    tau0 = tau0 or default_tau0
    energies, momenta = [], []
    for L in separations:
        positions = tuple((k - 0.5 * (len(speeds) - 1)) * L for k in range(len(speeds)))
        spec = ChainSpec(tuple(speeds), positions)
        report = expansion_check(spec, nl, grid, FieldPair.zeros(grid), build_cutoffs(positions, L, tau, tau0, grid))
        energies.append(report.energy_residual)
        momenta.append(max(report.momentum_residual))
    expected = 0.5 * min(nu_star, tau0)
    energy_rate = _log_slope(separations, energies)
    momentum_rate = _log_slope(separations, momenta)
    passed = energy_rate >= expected and momentum_rate >= expected
    return ExpansionDecay(
        separations=list(separations), energy_residuals=energies, momentum_residuals=momenta,
        energy_rate=energy_rate, momentum_rate=momentum_rate, expected_rate=expected,
        passed=_check("expansion_tail_decay", passed),
    )


def expansion_remainder_scaling(
    spec: ChainSpec,
    nl: Nonlinearity,
    grid: Grid,
    eps: FieldPair,
    cutoffs: CutoffFamily,
    scales: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
) -> ScalingFit:
    """Exponent in s of what the windowed quadratic expansion misses at R + s eps."""
    base = expansion_check(spec, nl, grid, FieldPair.zeros(grid), cutoffs)
    values = []
    for s in scales:
        report = expansion_check(spec, nl, grid, s * eps, cutoffs)
        values.append(abs(
            report.energy_actual - base.energy_actual - report.first_order
            - (report.energy_predicted - base.energy_predicted)
        ))
    slope, _ = np.polyfit(np.log(scales), np.log(values), 1)
    return ScalingFit(scales=list(scales), values=values, exponent=float(slope))


class MomentumHessianReport(BaseModel):
    draws: int
    max_ratio: float
    passed: bool


def momentum_hessian_bound(grid: Grid, draws: int = 20, seed: int = 0) -> MomentumHessianReport:
    """|d2p(eps, eps)| = |int eps_eta eps_v| <= ||eps||_X^2 on random eps."""
    ratios = []
    for j in range(draws):
        eps = smooth_perturbation(grid, seed=seed + j)
        ratios.append(abs(inner(eps, hessian_momentum_apply(eps))) / x_norm(eps) ** 2)
    worst = max(ratios)
    return MomentumHessianReport(draws=draws, max_ratio=worst, passed=_check("momentum_hessian", worst <= 1.0))


def energy_drift_check(start: FieldPair, end: FieldPair, nl: Nonlinearity) -> tuple[float, float]:
    """Relative drift of (E, p) between two states."""
    e0, e1 = energy(start, nl), energy(end, nl)
    p0, p1 = momentum(start), momentum(end)
    return abs(e1 - e0) / (abs(e0) or 1.0), abs(p1 - p0) / (abs(p0) or 1.0)
