"""
Method-of-lines RK4 integration of the hydrodynamical system

    d_t eta = -2 D(v (1 - eta))
    d_t v   = -D(f(1 - eta) - v^2 - D^2 eta / (2 (1 - eta)) - (D eta)^2 / (4 (1 - eta)^2))

with spectral D on a periodic grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from darksol.config.settings import get_settings
from darksol.core.exceptions import BlowUpDetected, ConfigError, NonFinite, VacuumBreach
from darksol.core.field_ops import (
    FieldPair,
    Grid,
    derivative,
    energy,
    momentum,
    require_nonvacuum,
)
from darksol.core.nonlinearity import Nonlinearity, sound_speed
from darksol.utils.monitoring import get_logger, metrics

logger = get_logger(__name__)


class EvolutionConfig(BaseModel):
    """Time stepping parameters."""

    t_end: float = Field(gt=0, description="Final time")
    dt: Optional[float] = Field(default=None, gt=0, description="Explicit time step")
    cfl_lambda: Optional[float] = Field(default=None, gt=0, le=0.25, description="dt / dx^2")
    dealias: bool = Field(default=False, description="Apply the 2/3 rule to products")
    snapshot_every: int = Field(default=100, ge=1, description="Steps between callbacks")

    @model_validator(mode="after")
    def _one_step_rule(self) -> "EvolutionConfig":
        if self.dt is not None and self.cfl_lambda is not None:
            raise ValueError("give either dt or cfl_lambda, not both")
        return self

    def schedule(self, grid: Grid) -> tuple[float, int]:
        """(dt, n_steps) with n_steps * dt = t_end exactly."""
        dx2 = grid.dx ** 2
        if self.dt is not None:
            if self.dt / dx2 > 0.25:
                raise ConfigError("dt exceeds the RK4 stability limit 0.25 dx^2", dt=self.dt, dx=grid.dx)
            target = self.dt
        else:
            ratio = self.cfl_lambda if self.cfl_lambda is not None else get_settings().solver.cfl_lambda
            target = ratio * dx2
        n_steps = max(1, math.ceil(self.t_end / target - 1e-12))
        return self.t_end / n_steps, n_steps


class EvolutionCallback(Protocol):
    def __call__(self, t: float, field: FieldPair, step: int) -> None: ...


def _dealias_mask(grid: Grid) -> np.ndarray:
    index = np.arange(grid.k.size)
    return index <= grid.n // 3


def _filtered(u: np.ndarray, grid: Grid) -> np.ndarray:
    spectrum = np.fft.rfft(u)
    spectrum[~_dealias_mask(grid)] = 0.0
    return np.fft.irfft(spectrum, n=grid.n)


def rhs(field: FieldPair, nl: Nonlinearity, dealias: bool = False) -> FieldPair:
    """Time derivative of (eta, v)."""
    require_nonvacuum(field)
    grid = field.grid
    eta, v = field.eta, field.v
    rho = 1.0 - eta
    d_eta = derivative(eta, grid, 1)
    d2_eta = derivative(eta, grid, 2)
    flux = v * rho
    pressure = nl.f(rho) - v * v - d2_eta / (2.0 * rho) - d_eta ** 2 / (4.0 * rho ** 2)
    if dealias:
        flux = _filtered(flux, grid)
        pressure = _filtered(pressure, grid)
    return FieldPair(-2.0 * derivative(flux, grid, 1), -derivative(pressure, grid, 1), grid)


def rk4_step(field: FieldPair, nl: Nonlinearity, dt: float, dealias: bool = False) -> FieldPair:
    k1 = rhs(field, nl, dealias)
    k2 = rhs(field + (0.5 * dt) * k1, nl, dealias)
    k3 = rhs(field + (0.5 * dt) * k2, nl, dealias)
    k4 = rhs(field + dt * k3, nl, dealias)
    return field + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class EvolutionResult:
    field: FieldPair
    t: float
    steps: int
    dt: float


def integrate(
    initial: FieldPair,
    nl: Nonlinearity,
    cfg: EvolutionConfig,
    callbacks: Sequence[EvolutionCallback] = (),
) -> EvolutionResult:
    """Advance ``initial`` to ``cfg.t_end``.

    Callbacks run at step 0, every ``cfg.snapshot_every`` steps and at the
    final step. Reaching max eta >= 1 - margin raises BlowUpDetected.
    """
    grid = initial.grid
    dt, n_steps = cfg.schedule(grid)
    margin = get_settings().solver.vacuum_margin
    if not initial.is_finite():
        raise NonFinite("initial data contains non-finite samples")
    logger.info("evolution started", t_end=cfg.t_end, dt=dt, steps=n_steps, n=grid.n)

    current = FieldPair(initial.eta.copy(), initial.v.copy(), grid)
    for callback in callbacks:
        callback(0.0, current, 0)
    t = 0.0
    for step in range(1, n_steps + 1):
        try:
            current = rk4_step(current, nl, dt, cfg.dealias)
        except VacuumBreach as exc:
            raise BlowUpDetected("vacuum reached inside an RK4 stage", t=t, step=step) from exc
        t = step * dt
        if not current.is_finite():
            raise NonFinite("non-finite field during evolution", t=t, step=step)
        if current.max_eta >= 1.0 - margin:
            raise BlowUpDetected("max eta reached the vacuum threshold", t=t, max_eta=current.max_eta)
        if step % cfg.snapshot_every == 0 or step == n_steps:
            for callback in callbacks:
                callback(t, current, step)
    metrics.increment_rk4_steps(n_steps)
    logger.info("evolution finished", t=t, max_eta=current.max_eta)
    return EvolutionResult(field=current, t=t, steps=n_steps, dt=dt)


@dataclass
class ConservationMonitor:
    """Records E and p at each callback."""

    nl: Nonlinearity
    times: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    momenta: list[float] = field(default_factory=list)

    def __call__(self, t: float, field: FieldPair, step: int) -> None:
        self.times.append(t)
        self.energies.append(energy(field, self.nl))
        self.momenta.append(momentum(field))

    @staticmethod
    def _drift(values: list[float]) -> float:
        base = values[0]
        scale = abs(base) if base != 0.0 else 1.0
        return max(abs(value - base) for value in values) / scale

    @property
    def energy_drift(self) -> float:
        return self._drift(self.energies)

    @property
    def momentum_drift(self) -> float:
        return self._drift(self.momenta)


@dataclass
class SnapshotCollector:
    times: list[float] = field(default_factory=list)
    fields: list[FieldPair] = field(default_factory=list)

    def __call__(self, t: float, field: FieldPair, step: int) -> None:
        self.times.append(t)
        self.fields.append(FieldPair(field.eta.copy(), field.v.copy(), field.grid))


def reverse_time(field: FieldPair) -> FieldPair:
    """(eta, v) -> (eta, -v); evolving this forward runs the flow backward."""
    return field.reversed_velocity()


def dispersion_relation(nl: Nonlinearity, k: float) -> float:
    """omega(k) = sqrt(c_s^2 k^2 + k^4)."""
    return math.sqrt(sound_speed(nl) ** 2 * k * k + k ** 4)


def peak_position(field: FieldPair) -> float:
    """Location of max eta refined by a three-point parabola."""
    grid = field.grid
    j = int(np.argmax(field.eta))
    left, mid, right = field.eta[j - 1], field.eta[j], field.eta[(j + 1) % grid.n]
    curvature = left - 2.0 * mid + right
    offset = 0.5 * (left - right) / curvature if curvature != 0.0 else 0.0
    return float(grid.x[j] + offset * grid.dx)


def dispersion_frequency(
    nl: Nonlinearity,
    grid: Grid,
    mode: int = 4,
    amplitude: float = 1e-6,
    periods: float = 4.0,
) -> tuple[float, float]:
    """Measured and predicted angular frequency of a small standing wave.

    The initial datum is eta = amplitude * cos(k x), v = 0 with
    k = 2 pi mode / length; the cos(k x) coefficient oscillates as cos(omega t).
    """
    k = 2.0 * math.pi * mode / grid.length
    predicted = dispersion_relation(nl, k)
    start = FieldPair(amplitude * np.cos(k * grid.x), np.zeros(grid.n), grid)
    basis = np.cos(k * grid.x)
    series: list[tuple[float, float]] = []

    def record(t: float, field: FieldPair, step: int) -> None:
        series.append((t, float(field.eta @ basis) * 2.0 / grid.n))

    t_end = periods * 2.0 * math.pi / predicted
    _, n_steps = EvolutionConfig(t_end=t_end).schedule(grid)
    cfg = EvolutionConfig(t_end=t_end, snapshot_every=max(1, int(n_steps / (50 * periods))))
    integrate(start, nl, cfg, [record])

    times = np.array([t for t, _ in series])
    values = np.array([value for _, value in series])
    sign_change = np.flatnonzero(np.signbit(values[:-1]) != np.signbit(values[1:]))
    if sign_change.size < 2:
        raise ConfigError("too few zero crossings to measure a frequency", mode=mode)
    crossings = times[sign_change] - values[sign_change] * (
        times[sign_change + 1] - times[sign_change]
    ) / (values[sign_change + 1] - values[sign_change])
    measured = math.pi * (crossings.size - 1) / (crossings[-1] - crossings[0])
    return float(measured), predicted
