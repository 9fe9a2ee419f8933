"""
Soliton chains, their orthogonal decomposition and modulation tracking.

A field Q near a chain is written Q = sum_k Q_{c_k}(. - a_k) + eps with the
2N conditions

    <eps, d_x Q_{c_k,a_k}> = 0,    grad p(Q_{c_k,a_k}) . eps = 0,

solved for (a, c) by damped Newton. The Newton Jacobian is the modulation
matrix M, split as M = D + H where D keeps the eps-free diagonal couplings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from darksol.config.settings import get_settings
from darksol.core.exceptions import (
    BadOrdering,
    DarksolError,
    GridTooSmall,
    NoConvergence,
    NoZero,
)
from darksol.core.field_ops import (
    FieldPair,
    Grid,
    HydroField,
    inner,
    momentum_pairing,
    x_norm,
)
from darksol.core.nonlinearity import Nonlinearity, sound_speed
from darksol.core.profile import c_derivative_samples, profile_shape
from darksol.utils.monitoring import get_logger, metrics

logger = get_logger(__name__)


@dataclass(frozen=True)
class ChainSpec:
    """Speeds c_1 < ... < c_N and positions a_1 < ... < a_N."""

    speeds: tuple[float, ...]
    positions: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "speeds", tuple(float(c) for c in self.speeds))
        object.__setattr__(self, "positions", tuple(float(a) for a in self.positions))
        if len(self.speeds) != len(self.positions) or not self.speeds:
            raise BadOrdering("speeds and positions must be non-empty and of equal length")

    @property
    def N(self) -> int:
        return len(self.speeds)

    @property
    def min_gap(self) -> float:
        return float(np.min(np.diff(self.positions))) if self.N > 1 else math.inf

    @property
    def sigma_star(self) -> float:
        """Smallest speed gap; inf for a single soliton."""
        return float(np.min(np.diff(self.speeds))) if self.N > 1 else math.inf

    def is_well_ordered(self) -> bool:
        return bool(np.all(np.diff(self.speeds) > 0.0) and np.all(np.diff(self.positions) > 0.0))

    def validate(self, nl: Nonlinearity, L: Optional[float] = None, c0_hint: float = 0.0) -> None:
        c_s = sound_speed(nl)
        if any(not (max(c0_hint, 0.0) < c < c_s) for c in self.speeds):
            raise BadOrdering("speeds must lie in (c0, c_s)", speeds=list(self.speeds), c_s=c_s)
        if not self.is_well_ordered():
            raise BadOrdering("speeds and positions must be strictly increasing",
                              speeds=list(self.speeds), positions=list(self.positions))
        if L is not None and self.min_gap <= L:
            raise BadOrdering("position gaps must exceed L", min_gap=self.min_gap, L=L)

    def with_values(self, speeds: Iterable[float], positions: Iterable[float]) -> "ChainSpec":
        return ChainSpec(tuple(speeds), tuple(positions))


@dataclass(frozen=True, eq=False)
class SolitonTerm:
    """One translated soliton with the derivatives used by the Newton solve."""

    c: float
    a: float
    q: FieldPair
    dx: FieldPair
    dxx: FieldPair
    dc: FieldPair
    dxdc: FieldPair


def _require_inside(spec: ChainSpec, nl: Nonlinearity, grid: Grid) -> None:
    for c, a in zip(spec.speeds, spec.positions):
        nu = profile_shape(nl, c).nu
        if abs(a) + 10.0 / nu > grid.halflength:
            raise GridTooSmall("soliton closer than 10 / nu_c to the domain edge", c=c, a=a)


def _sum_profiles(spec: ChainSpec, nl: Nonlinearity, grid: Grid) -> FieldPair:
    eta = np.zeros(grid.n)
    v = np.zeros(grid.n)
    for c, a in zip(spec.speeds, spec.positions):
        samples = profile_shape(nl, c).sample(grid.wrap(grid.x - a))
        eta += samples.eta
        v += samples.v
    return FieldPair(eta, v, grid)


def build_chain(spec: ChainSpec, nl: Nonlinearity, grid: Grid) -> HydroField:
    """R_{c,a} = sum_k Q_{c_k}(. - a_k); raises VacuumBreach if max eta reaches 1."""
    _require_inside(spec, nl, grid)
    return HydroField.of(_sum_profiles(spec, nl, grid))


def chain_derivatives(
    spec: ChainSpec, nl: Nonlinearity, grid: Grid, h: Optional[float] = None
) -> list[SolitonTerm]:
    terms = []
    for c, a in zip(spec.speeds, spec.positions):
        x = grid.wrap(grid.x - a)
        s = profile_shape(nl, c).sample(x)
        d = c_derivative_samples(nl, c, x, h)
        terms.append(SolitonTerm(
            c=c, a=a,
            q=s.field(grid), dx=s.dx_field(grid), dxx=s.dxx_field(grid),
            dc=d.field(grid), dxdc=d.dx_field(grid),
        ))
    return terms


def orthogonality_residuals(eps: FieldPair, terms: Sequence[SolitonTerm]) -> np.ndarray:
    """(<eps, d_x Q_k>)_k followed by (grad p(Q_k) . eps)_k."""
    n = len(terms)
    out = np.empty(2 * n)
    for k, term in enumerate(terms):
        out[k] = inner(eps, term.dx)
        out[k + n] = momentum_pairing(term.q, eps)
    return out


@dataclass(frozen=True)
class ModulationMatrices:
    M: np.ndarray
    D: np.ndarray
    H: np.ndarray


def _matrices(eps: FieldPair, terms: Sequence[SolitonTerm]) -> ModulationMatrices:
    n = len(terms)
    M = np.zeros((2 * n, 2 * n))
    D = np.zeros((2 * n, 2 * n))
    for k, tk in enumerate(terms):
        for j, tj in enumerate(terms):
            M[k, j] = inner(tj.dx, tk.dx)
            M[k, j + n] = -inner(tj.dc, tk.dx)
            M[k + n, j] = momentum_pairing(tk.q, tj.dx)
            M[k + n, j + n] = -momentum_pairing(tk.q, tj.dc)
        M[k, k] -= inner(tk.dxx, eps)
        M[k, k + n] += inner(tk.dxdc, eps)
        M[k + n, k] -= momentum_pairing(tk.dx, eps)
        M[k + n, k + n] += momentum_pairing(tk.dc, eps)

        D[k, k] = inner(tk.dx, tk.dx)
        D[k, k + n] = -inner(tk.dc, tk.dx)
        D[k + n, k] = momentum_pairing(tk.q, tk.dx)
        D[k + n, k + n] = -momentum_pairing(tk.q, tk.dc)
    return ModulationMatrices(M=M, D=D, H=M - D)


@dataclass(frozen=True, eq=False)
class ModulationFit:
    speeds: np.ndarray
    positions: np.ndarray
    epsilon: FieldPair = field(repr=False)
    residual_norm: float
    newton_iters: int

    @property
    def spec(self) -> ChainSpec:
        return ChainSpec(tuple(self.speeds), tuple(self.positions))

    @property
    def eps_xnorm(self) -> float:
        return x_norm(self.epsilon)


def _remainder(field: FieldPair, spec: ChainSpec, nl: Nonlinearity) -> FieldPair:
    return field - _sum_profiles(spec, nl, field.grid)


def decompose(field: FieldPair, guess: ChainSpec, nl: Nonlinearity) -> ModulationFit:
    """Damped Newton for the 2N orthogonality conditions in the unknowns (a, c)."""
    solver = get_settings().solver
    n = guess.N
    spec = guess
    try:
        eps = _remainder(field, spec, nl)
        terms = chain_derivatives(spec, nl, field.grid)
    except (NoZero, GridTooSmall) as exc:
        raise NoConvergence("initial guess outside the admissible set", guess=str(guess)) from exc
    residual = orthogonality_residuals(eps, terms)
    q_scale = min(x_norm(t.q) for t in terms)

    for iteration in range(solver.newton_max_iter + 1):
        norm = float(np.max(np.abs(residual)))
        tol = max(solver.newton_tol, 1e-10 * x_norm(eps) * q_scale)
        if norm <= tol:
            metrics.increment_newton_iterations("converged", iteration)
            logger.debug("decomposition converged", iterations=iteration, residual=norm)
            return ModulationFit(
                speeds=np.array(spec.speeds), positions=np.array(spec.positions),
                epsilon=eps, residual_norm=norm, newton_iters=iteration,
            )
        if iteration == solver.newton_max_iter:
            break

        step = np.linalg.solve(_matrices(eps, terms).M, -residual)
        accepted = False
        scale = 1.0
        for _ in range(solver.newton_max_halvings + 1):
            trial = spec.with_values(
                np.array(spec.speeds) + scale * step[n:],
                np.array(spec.positions) + scale * step[:n],
            )
            try:
                trial_eps = _remainder(field, trial, nl)
                trial_terms = chain_derivatives(trial, nl, field.grid)
            except DarksolError:
                scale *= 0.5
                continue
            trial_residual = orthogonality_residuals(trial_eps, trial_terms)
            if float(np.max(np.abs(trial_residual))) < norm:
                spec, eps, terms, residual = trial, trial_eps, trial_terms, trial_residual
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            metrics.increment_newton_iterations("stalled", iteration + 1)
            logger.error("damped Newton stalled", iteration=iteration, residual=norm)
            raise NoConvergence("damped Newton stalled", iteration=iteration, residual=norm)

    metrics.increment_newton_iterations("exhausted", solver.newton_max_iter)
    raise NoConvergence("Newton iteration limit reached", residual=float(np.max(np.abs(residual))))


def modulation_matrix(field: FieldPair, fit: ModulationFit, nl: Nonlinearity) -> ModulationMatrices:
    """M = D + H at a converged fit."""
    terms = chain_derivatives(fit.spec, nl, field.grid)
    return _matrices(fit.epsilon, terms)


@dataclass
class TrackResult:
    fits: list[ModulationFit]
    times: np.ndarray
    a_dot: np.ndarray
    c_dot: np.ndarray
    failure: Optional[str] = None

    @property
    def completed(self) -> bool:
        return self.failure is None


def _centered_rates(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    if values.shape[0] < 2:
        return np.zeros_like(values)
    return np.gradient(values, times, axis=0, edge_order=2 if values.shape[0] > 2 else 1)


def track(
    times: Sequence[float], fields: Sequence[FieldPair], guess: ChainSpec, nl: Nonlinearity
) -> TrackResult:
    """Warm-started decomposition of each snapshot; stops at the first failure."""
    logger.info("tracking started", snapshots=len(fields), N=guess.N)
    fits: list[ModulationFit] = []
    failure: Optional[str] = None
    current = guess
    for t, snapshot in zip(times, fields):
        try:
            fit = decompose(snapshot, current, nl)
        except NoConvergence as exc:
            failure = f"t={t:.6g}: {exc}"
            logger.warning("tracking stopped", t=t, reason=str(exc))
            break
        fits.append(fit)
        current = fit.spec
    logger.info("tracking finished", fits=len(fits), failed=failure is not None)
    done = np.asarray(times[: len(fits)], dtype=float)
    if fits:
        a = np.stack([f.positions for f in fits])
        c = np.stack([f.speeds for f in fits])
        a_dot, c_dot = _centered_rates(done, a), _centered_rates(done, c)
    else:
        a_dot = c_dot = np.zeros((0, guess.N))
    return TrackResult(fits=fits, times=done, a_dot=a_dot, c_dot=c_dot, failure=failure)


class VacuumMarginReport(BaseModel):
    max_eta: float
    beta_star: float
    k_d: float
    passed: bool


def tail_constant(nl: Nonlinearity, c: float) -> float:
    """sup_x eta_c(x) exp(nu_c |x|), sampled on [0, 20 / nu_c]."""
    shape = profile_shape(nl, c)
    x = np.linspace(0.0, 20.0 / shape.nu, 4001)
    return float(np.max(shape.eta(x) * np.exp(shape.nu * x)))


def vacuum_margin(spec: ChainSpec, nl: Nonlinearity, grid: Grid) -> VacuumMarginReport:
    """Compare max eta of the chain with the bound beta* built from the tails."""
    chain = build_chain(spec, nl, grid)
    shapes = [profile_shape(nl, c) for c in spec.speeds]
    k_d = max(tail_constant(nl, c) for c in spec.speeds)
    nu = min(s.nu for s in shapes)
    n = spec.N
    gap = spec.min_gap if n > 1 else math.inf
    beta = max(s.xi for s in shapes)
    if n > 1:
        beta += n * (n - 1) * k_d * math.exp(-2.0 * nu * gap / 3.0) + k_d * n * math.exp(-nu * gap / 3.0)
    max_eta = chain.max_eta
    return VacuumMarginReport(max_eta=max_eta, beta_star=beta, k_d=k_d, passed=max_eta <= beta < 1.0)


class LipschitzReport(BaseModel):
    draws: int
    radius: float
    k_max: float
    k_median: float
    k_min: float

    @property
    def spread(self) -> float:
        return self.k_max / self.k_median


def lipschitz_check(
    spec: ChainSpec, nl: Nonlinearity, grid: Grid, draws: int = 50, radius: float = 1e-2, seed: int = 0
) -> LipschitzReport:
    """Ratios ||R_{c*,a*} - R_{c,a}||_X / (|c* - c| + |a* - a|) over random displacements."""
    rng = np.random.default_rng(seed)
    base = build_chain(spec, nl, grid)
    ratios = []
    for _ in range(draws):
        dc = rng.uniform(-radius, radius, spec.N)
        da = rng.uniform(-radius, radius, spec.N)
        moved = build_chain(spec.with_values(np.add(spec.speeds, dc), np.add(spec.positions, da)), nl, grid)
        ratios.append(x_norm(moved - base) / float(np.sum(np.abs(dc)) + np.sum(np.abs(da))))
    values = np.array(ratios)
    return LipschitzReport(
        draws=draws, radius=radius, k_max=float(values.max()),
        k_median=float(np.median(values)), k_min=float(values.min()),
    )
