"""
Nonlinearities f(rho) written as polynomials in (1 - rho).

A nonlinearity is stored through its coefficients b_j in
f(rho) = sum_{j>=1} b_j (1 - rho)^j, so that f(1) = 0 holds by construction and
the primitive F(r) = int_r^1 f, every derivative of f and the traveling-wave
polynomial N_c all have closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, List, Mapping, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, Field

from darksol.config.settings import get_settings
from darksol.core.exceptions import ConfigError, DefocusingViolated, H3Violated
from darksol.utils.monitoring import get_logger

logger = get_logger(__name__)


class NonlinearityKind(str, Enum):
    GROSS_PITAEVSKII = "gp"
    POLY_1MR = "poly_1mr"


@dataclass(frozen=True)
class Nonlinearity:
    """Immutable polynomial nonlinearity; hashable so profiles can be cached on it."""

    coeffs: tuple[float, ...]
    kind: NonlinearityKind = NonlinearityKind.POLY_1MR
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        coeffs = tuple(float(b) for b in self.coeffs)
        if not coeffs:
            raise ConfigError("nonlinearity needs at least one coefficient")
        if not all(math.isfinite(b) for b in coeffs):
            raise ConfigError("nonlinearity coefficients must be finite", coeffs=coeffs)
        # trailing zeros would change the hash without changing f
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coeffs", coeffs)

    # polynomial in t = 1 - rho
    @cached_property
    def _p(self) -> Polynomial:
        return Polynomial((0.0,) + self.coeffs)

    @cached_property
    def _p1(self) -> Polynomial:
        return self._p.deriv(1)

    @cached_property
    def _p2(self) -> Polynomial:
        return self._p.deriv(2)

    @cached_property
    def _p3(self) -> Polynomial:
        return self._p.deriv(3)

    @cached_property
    def _pint(self) -> Polynomial:
        return self._p.integ(1, lbnd=0.0)

    def f(self, rho: Any) -> Any:
        return self._p(1.0 - np.asarray(rho, dtype=float))

    def df(self, rho: Any) -> Any:
        return -self._p1(1.0 - np.asarray(rho, dtype=float))

    def d2f(self, rho: Any) -> Any:
        return self._p2(1.0 - np.asarray(rho, dtype=float))

    def d3f(self, rho: Any) -> Any:
        return -self._p3(1.0 - np.asarray(rho, dtype=float))

    def F(self, r: Any) -> Any:
        """Primitive F(r) = int_r^1 f(rho) d rho."""
        return self._pint(1.0 - np.asarray(r, dtype=float))

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class ModelConstants:
    c_s: float
    k: float
    k_tilde: float
    c0_hint: float = 0.0


class HypothesisEntry(BaseModel):
    """One line of a hypothesis report."""

    name: str = Field(..., description="Hypothesis label")
    passed: bool = Field(..., description="Verdict on the scan window")
    detail: str = Field(default="", description="Human readable summary")
    violating_rho: Optional[float] = Field(None, description="Worst violating rho, if any")
    scope: str = Field(default="exact", description="'exact' or 'verified on window'")


class HypothesisReport(BaseModel):
    """Verdicts for defocusing and (H1)-(H3)."""

    nonlinearity: dict[str, Any]
    rho_min: float
    rho_max: float
    entries: List[HypothesisEntry]
    h2_fit: Optional[dict[str, float]] = None

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def entry(self, name: str) -> HypothesisEntry:
        for item in self.entries:
            if item.name == name:
                return item
        raise KeyError(name)


def gross_pitaevskii() -> Nonlinearity:
    """f(rho) = 1 - rho."""
    return Nonlinearity((1.0,), NonlinearityKind.GROSS_PITAEVSKII, name="gp")


def polynomial(coeffs: Sequence[float]) -> Nonlinearity:
    """f(rho) = sum_j coeffs[j-1] (1 - rho)^j."""
    return Nonlinearity(tuple(coeffs), NonlinearityKind.POLY_1MR, name="poly_1mr")


def cubic_quintic(a: float) -> Nonlinearity:
    """f(rho) = (1 - rho) + a (1 - rho)^2, a cubic-quintic mixture with f''(1) = 2a."""
    return Nonlinearity((1.0, float(a)), NonlinearityKind.POLY_1MR, name=f"cubic_quintic({a})")


def from_spec(spec: Mapping[str, Any]) -> Nonlinearity:
    """Build a nonlinearity from ``{"kind": "gp"}`` or ``{"kind": "poly_1mr", "coeffs": [...]}``."""
    kind = spec.get("kind")
    if kind == NonlinearityKind.GROSS_PITAEVSKII.value:
        return gross_pitaevskii()
    if kind == NonlinearityKind.POLY_1MR.value:
        coeffs = spec.get("coeffs")
        if not coeffs:
            raise ConfigError("poly_1mr nonlinearity requires 'coeffs'")
        return polynomial(coeffs)
    if kind == "cubic_quintic":
        return cubic_quintic(float(spec.get("a", 0.0)))
    raise ConfigError("unknown nonlinearity kind", kind=kind)


def sound_speed(nl: Nonlinearity) -> float:
    """c_s = sqrt(-2 f'(1))."""
    df1 = float(nl.df(1.0))
    if df1 >= 0.0:
        raise DefocusingViolated("f'(1) must be negative", df1=df1)
    return math.sqrt(-2.0 * df1)


def transonic_constants(nl: Nonlinearity, c0_hint: float = 0.0) -> ModelConstants:
    """Return (c_s, k, k_tilde) with k = 2 f''(1) + 6 f'(1) and k_tilde = -3 / k."""
    c_s = sound_speed(nl)
    df1 = float(nl.df(1.0))
    d2f1 = float(nl.d2f(1.0))
    h3 = d2f1 + 3.0 * df1
    if abs(h3) < get_settings().solver.hypothesis_tol:
        raise H3Violated("f''(1) + 3 f'(1) vanishes", value=h3)
    k = 2.0 * d2f1 + 6.0 * df1
    return ModelConstants(c_s=c_s, k=k, k_tilde=-3.0 / k, c0_hint=c0_hint)


def f_tilde(nl: Nonlinearity, rho: Any) -> Any:
    """F~(rho) = rho f(1 - rho) - F(1 - rho), the flux density of the virial identity."""
    rho = np.asarray(rho, dtype=float)
    return rho * nl.f(1.0 - rho) - nl.F(1.0 - rho)


def taylor_coefficients(nl: Nonlinearity) -> dict[str, np.ndarray]:
    """Coefficients (ascending in eta) of F(1-eta), f(1-eta) and f'(1-eta)."""
    return {
        "F": nl._pint.coef.copy(),
        "f": nl._p.coef.copy(),
        "df": -nl._p1.coef.copy(),
    }


def nc_poly(nl: Nonlinearity, c: float) -> Polynomial:
    """Reduced traveling-wave polynomial n_c with N_c(x) = x^2 n_c(x).

    n_c(x) = c^2 - 4 (1 - x) sum_j b_j x^(j-1) / (j + 1), so n_c(0) = c^2 - c_s^2.
    """
    s = Polynomial([b / (j + 2) for j, b in enumerate(nl.coeffs)])
    return Polynomial([c * c]) - 4.0 * Polynomial([1.0, -1.0]) * s


def _first_violation(rho: np.ndarray, defect: np.ndarray, tol: float) -> Optional[float]:
    bad = defect > tol
    if not np.any(bad):
        return None
    return float(rho[int(np.argmax(defect))])


def check_hypotheses(
    nl: Nonlinearity,
    rho_scan: Sequence[float] | np.ndarray = (0.0, 4.0),
    points: int = 4001,
) -> HypothesisReport:
    """Evaluate defocusing and (H1)-(H3) on a finite scan window.

    ``rho_scan`` is either an explicit array of samples or a ``(lo, hi)`` pair
    sampled uniformly with ``points`` nodes. (H2) is only ever verified on
    ``[2, rho_max]``.
    """
    tol = get_settings().solver.hypothesis_tol
    rho = np.asarray(rho_scan, dtype=float)
    if rho.ndim == 1 and rho.size == 2:
        rho = np.linspace(rho[0], rho[1], points)
    if rho.size == 0 or not np.all(np.isfinite(rho)):
        raise ConfigError("rho scan must be a finite, non-empty window")
    if rho.min() < 0.0:
        raise ConfigError("rho scan must stay in [0, inf)", rho_min=float(rho.min()))
    rho_max = float(rho.max())
    if rho_max < 2.0:
        raise ConfigError("rho scan must reach rho_max >= 2", rho_max=rho_max)

    entries: list[HypothesisEntry] = []
    df1 = float(nl.df(1.0))
    defocusing = df1 < 0.0
    entries.append(HypothesisEntry(
        name="defocusing",
        passed=defocusing,
        detail=f"f'(1) = {df1:.6g}",
        violating_rho=None if defocusing else 1.0,
    ))

    if defocusing:
        c_s2 = -2.0 * df1
        defect = c_s2 * (1.0 - rho) ** 2 / 4.0 - nl.F(rho)
        scale = np.maximum(1.0, np.abs(nl.F(rho)))
        worst = _first_violation(rho, defect / scale, tol)
        entries.append(HypothesisEntry(
            name="H1",
            passed=worst is None,
            detail="c_s^2 (1-rho)^2 / 4 <= F(rho)",
            violating_rho=worst,
            scope="verified on window",
        ))
    else:
        entries.append(HypothesisEntry(name="H1", passed=False, detail="c_s undefined"))

    window = rho[rho >= 2.0]
    big_f = nl.F(window)
    distance = np.abs(1.0 - window)
    positive = big_f > 0.0
    if np.count_nonzero(positive) >= 2:
        slope, _ = np.polyfit(np.log(distance[positive]), np.log(big_f[positive]), 1)
        q = max(2.0, float(np.ceil(slope - 1e-9)))
    else:
        q = 2.0
    m_const = float(np.max(np.clip(big_f, 0.0, None) / distance ** q))
    h2_ok = bool(np.all(np.isfinite(big_f))) and math.isfinite(m_const)
    entries.append(HypothesisEntry(
        name="H2",
        passed=h2_ok,
        detail=f"F(rho) <= {m_const:.6g} |1-rho|^{q:g} on [2, {rho_max:g}]",
        scope="verified on window",
    ))

    h3 = float(nl.d2f(1.0)) + 3.0 * df1
    entries.append(HypothesisEntry(
        name="H3",
        passed=abs(h3) >= tol,
        detail=f"f''(1) + 3 f'(1) = {h3:.6g}",
        violating_rho=None if abs(h3) >= tol else 1.0,
    ))

    report = HypothesisReport(
        nonlinearity=nl.describe(),
        rho_min=float(rho.min()),
        rho_max=rho_max,
        entries=entries,
        h2_fit={"M": m_const, "q": q},
    )
    logger.debug("hypotheses checked", passed=report.passed, nonlinearity=nl.describe())
    return report
