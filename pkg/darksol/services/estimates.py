"""
Interaction estimates between exponentially decaying profiles.

Products of profiles centered at distance L apart are O((2/(p m) + L)^(1/p) e^(-m L))
in L^p, where m is the smaller decay rate. The checks below evaluate both the
closed-form bound and the actual norms on translated soliton profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel
from scipy import integrate as sp_integrate
from scipy.special import logsumexp

from darksol.core.exceptions import BadPolynomial
from darksol.core.nonlinearity import Nonlinearity, taylor_coefficients
from darksol.core.profile import ProfileShape, profile_shape
from darksol.utils.monitoring import get_logger, metrics

logger = get_logger(__name__)

Exponents = tuple[int, ...]


class CrosstermResult(BaseModel):
    computed: float
    bound: float
    passed: bool


def _log_crossterm_norm(d: float, nu_a: float, nu_b: float, p: float) -> float:
    m = min(nu_a, nu_b)
    if math.isinf(p):
        return -m * d
    y = p * abs(nu_a - nu_b) * d
    middle = d * (-math.expm1(-y) / y) if y > 0.0 else d
    pieces = [
        -p * nu_b * d - math.log(p * nu_b),
        -p * nu_a * d - math.log(p * nu_a),
        -p * m * d + math.log(middle) if middle > 0.0 else -math.inf,
    ]
    return float(logsumexp(pieces)) / p


def crossterm_bound_check(a: float, b: float, nu_a: float, nu_b: float, p: float) -> CrosstermResult:
    """||exp(-nu_a (x - a)^+) exp(-nu_b (x - b)^-)||_{L^p} against its closed-form bound."""
    if not (a < b and nu_a > 0.0 and nu_b > 0.0 and p >= 1.0):
        raise ValueError("need a < b, positive rates and p >= 1")
    d = b - a
    m = min(nu_a, nu_b)
    log_norm = _log_crossterm_norm(d, nu_a, nu_b, p)
    log_bound = -m * d if math.isinf(p) else math.log(2.0 / (p * m) + d) / p - m * d
    passed = log_norm <= log_bound + math.log1p(1e-12)
    return CrosstermResult(computed=math.exp(log_norm), bound=math.exp(log_bound), passed=passed)


def crossterm_draws(draws: int = 10_000, seed: int = 0) -> tuple[int, int]:
    """(passed, total) over random parameters."""
    rng = np.random.default_rng(seed)
    passed = 0
    for _ in range(draws):
        a = rng.uniform(-50.0, 50.0)
        b = a + rng.uniform(1e-3, 100.0)
        nu_a, nu_b = rng.uniform(1e-2, 3.0, 2)
        p = math.inf if rng.random() < 0.1 else rng.uniform(1.0, 8.0)
        passed += crossterm_bound_check(a, b, nu_a, nu_b, p).passed
    metrics.record_check("crossterm_bound", passed == draws)
    return passed, draws


@dataclass(frozen=True)
class CrossPolynomial:
    """Polynomial with no constant and no pure monomial terms."""

    terms: Mapping[Exponents, float]
    variables: int
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        for exponents, coef in self.terms.items():
            if len(exponents) != self.variables:
                raise BadPolynomial("exponent tuple has the wrong length", term=exponents)
            if coef != 0.0 and sum(1 for e in exponents if e) <= 1:
                raise BadPolynomial("pure monomials and constants are excluded", term=exponents)

    def __call__(self, values: Sequence[np.ndarray]) -> np.ndarray:
        if len(values) != self.variables:
            raise BadPolynomial("wrong number of arguments", expected=self.variables)
        out = np.zeros_like(np.asarray(values[0], dtype=float))
        for exponents, coef in self.terms.items():
            term = np.full_like(out, coef)
            for value, power in zip(values, exponents):
                if power:
                    term = term * np.asarray(value) ** power
            out = out + term
        return out


def _unit(m: int, index: int, power: int) -> list[int]:
    exps = [0] * m
    exps[index] = power
    return exps


def _add(terms: dict[Exponents, float], exps: Sequence[int], coef: float) -> None:
    key = tuple(exps)
    terms[key] = terms.get(key, 0.0) + coef


def elementary_symmetric(k: int, m: int) -> CrossPolynomial:
    """S^{k,M}, 2 <= k <= M."""
    terms: dict[Exponents, float] = {}
    for subset in combinations(range(m), k):
        exps = [0] * m
        for j in subset:
            exps[j] = 1
        _add(terms, exps, 1.0)
    return CrossPolynomial(terms, m, name=f"S^{{{k},{m}}}")


def _square_times_other(m: int, power: int, offset: int = 0, total: int = 0) -> dict[Exponents, float]:
    total = total or m
    terms: dict[Exponents, float] = {}
    for k in range(m):
        for j in range(m):
            if j != k:
                exps = [0] * total
                exps[offset + k] = power
                exps[j] += 1
                _add(terms, exps, 1.0)
    return terms


def b_polynomial(m: int) -> CrossPolynomial:
    """B^M = sum_{k != j} X_k^2 X_j."""
    return CrossPolynomial(_square_times_other(m, 2), m, name=f"B^{m}")


def b_tilde_polynomial(m: int) -> CrossPolynomial:
    """B~^{2M} = sum_{k != j} Y_k^2 X_j in the variables (X_1..X_M, Y_1..Y_M)."""
    return CrossPolynomial(_square_times_other(m, 2, offset=m, total=2 * m), 2 * m, name=f"B~^{2 * m}")


def c_polynomial(m: int) -> CrossPolynomial:
    """C^M = sum_{k != j} X_k^3 X_j."""
    return CrossPolynomial(_square_times_other(m, 3), m, name=f"C^{m}")


def d_polynomial(m: int) -> CrossPolynomial:
    """D^M = prod (1 - X_k) - (1 - sum X_k) = sum_{k >= 2} (-1)^k S^{k,M}."""
    terms: dict[Exponents, float] = {}
    for k in range(2, m + 1):
        for exps, coef in elementary_symmetric(k, m).terms.items():
            _add(terms, exps, (-1) ** k * coef)
    return CrossPolynomial(terms, m, name=f"D^{m}")


PRESETS = {
    "S2": lambda m: elementary_symmetric(2, m),
    "B": b_polynomial,
    "B_tilde": b_tilde_polynomial,
    "C": c_polynomial,
    "D": d_polynomial,
}


def _lp_norm(values: np.ndarray, x: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(values)))
    return float(sp_integrate.trapezoid(np.abs(values) ** p, x) ** (1.0 / p))


def _chain_line(shapes: Sequence[ProfileShape], L: float, spacing: float) -> tuple[np.ndarray, list[float]]:
    positions = [k * L for k in range(len(shapes))]
    reach = 40.0 / min(s.nu for s in shapes)
    n = int(math.ceil((positions[-1] + 2.0 * reach) / spacing)) + 1
    return np.linspace(-reach, positions[-1] + reach, n), positions


class DecayFit(BaseModel):
    name: str
    separations: list[float]
    norms: list[float]
    fitted_rate: float
    expected_rate: float
    passed: bool


def _fit_rate(separations: Sequence[float], norms: Sequence[float], p: float, m: float) -> float:
    Ls = np.asarray(separations, dtype=float)
    if math.isinf(p):
        corrected = np.log(norms)
    else:
        corrected = np.log(norms) - np.log(2.0 / (p * m) + Ls) / p
    slope, _ = np.polyfit(Ls, corrected, 1)
    return float(-slope)


def polynomial_crossterm_check(
    nl: Nonlinearity,
    speeds: Sequence[float],
    poly: CrossPolynomial,
    p: float = 2.0,
    separations: Sequence[float] = (40.0, 60.0, 80.0),
    spacing: float = 0.05,
    ratio: float = 0.9,
) -> DecayFit:
    """Fitted L-decay rate of ||P(tau_{a_1} eta_1, ...)||_{L^p} against min nu."""
    shapes = [profile_shape(nl, c) for c in speeds]
    m = min(s.nu for s in shapes)
    norms = []
    for L in separations:
        x, positions = _chain_line(shapes, L, spacing)
        samples = [s.sample(x - a) for s, a in zip(shapes, positions)]
        values = [s.eta for s in samples]
        if poly.variables == 2 * len(shapes):
            values = values + [s.deta for s in samples]
        norms.append(_lp_norm(poly(values), x, p))
    rate = _fit_rate(separations, norms, p, m)
    passed = rate >= ratio * m
    metrics.record_check(f"polynomial_{poly.name}", passed)
    return DecayFit(name=poly.name, separations=list(separations), norms=norms,
                    fitted_rate=rate, expected_rate=m, passed=passed)


def f_expansion_density(nl: Nonlinearity, etas: Sequence[np.ndarray]) -> np.ndarray:
    """F(1 - sum eta_k) - sum_k F(1 - eta_k) through the Taylor coefficients of F(1 - .)."""
    expansion = Polynomial(taylor_coefficients(nl)["F"])
    return expansion(sum(etas)) - sum(expansion(e) for e in etas)


def f_expansion_residual(
    nl: Nonlinearity,
    speeds: Sequence[float],
    p: float = 2.0,
    separations: Sequence[float] = (40.0, 60.0, 80.0),
    spacing: float = 0.05,
    ratio: float = 0.9,
) -> DecayFit:
    """Decay in L of ||F(1 - eta_chain) - sum_k F(1 - eta_k)||_{L^p}.

    F(1 - eta) is expanded in powers of eta, so for Gross-Pitaevskii the
    residual is exactly the pairwise product sum_{j<k} eta_j eta_k.
    """
    shapes = [profile_shape(nl, c) for c in speeds]
    m = min(s.nu for s in shapes)
    norms = []
    for L in separations:
        x, positions = _chain_line(shapes, L, spacing)
        etas = [s.eta(x - a) for s, a in zip(shapes, positions)]
        norms.append(_lp_norm(f_expansion_density(nl, etas), x, p))
    rate = _fit_rate(separations, norms, p, m)
    passed = rate >= ratio * m
    metrics.record_check("f_expansion", passed)
    return DecayFit(name="F-expansion", separations=list(separations), norms=norms,
                    fitted_rate=rate, expected_rate=m, passed=passed)
