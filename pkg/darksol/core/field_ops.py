"""
Periodic grids, hydrodynamical fields and the functionals E and p.

Fields are sampled on a uniform periodic grid. Integrals use the trapezoidal
rule (spectrally accurate for smooth periodic integrands) and derivatives are
spectral by default, with a second-order finite-difference fallback.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Union

import numpy as np
from scipy import fft

from darksol.config.settings import get_settings
from darksol.core.exceptions import ConfigError, NonFinite, VacuumBreach
from darksol.core.nonlinearity import Nonlinearity

DerivativeMethod = Literal["spectral", "fd"]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with nodes x_j = -length/2 + j dx."""

    n: int
    length: float

    def __post_init__(self) -> None:
        if self.n < 16 or self.n & (self.n - 1):
            raise ConfigError("grid size must be a power of two >= 16", n=self.n)
        if not self.length > 0.0:
            raise ConfigError("grid length must be positive", length=self.length)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def halflength(self) -> float:
        return 0.5 * self.length

    @cached_property
    def x(self) -> np.ndarray:
        nodes = -self.halflength + self.dx * np.arange(self.n)
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers of the real FFT."""
        wavenumbers = 2.0 * np.pi * fft.rfftfreq(self.n, d=self.dx)
        wavenumbers.setflags(write=False)
        return wavenumbers

    def wrap(self, d: np.ndarray | float) -> np.ndarray:
        """Nearest periodic image of a displacement."""
        return np.mod(np.asarray(d) + self.halflength, self.length) - self.halflength

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.n * factor, self.length)


@dataclass(frozen=True, eq=False)
class FieldPair:
    """A pair (eta, v) of grid samples: a field, a perturbation or a covector."""

    eta: np.ndarray
    v: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        eta = np.asarray(self.eta, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if eta.shape != (self.grid.n,) or v.shape != (self.grid.n,):
            raise ConfigError("field samples do not match the grid", n=self.grid.n)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "FieldPair":
        return cls(np.zeros(grid.n), np.zeros(grid.n), grid)

    @classmethod
    def from_stacked(cls, vector: np.ndarray, grid: Grid) -> "FieldPair":
        return cls(vector[: grid.n], vector[grid.n:], grid)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.eta, self.v])

    def __add__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.eta + other.eta, self.v + other.v, self.grid)

    def __sub__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.eta - other.eta, self.v - other.v, self.grid)

    def __mul__(self, scale: float) -> "FieldPair":
        return FieldPair(scale * self.eta, scale * self.v, self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "FieldPair":
        return FieldPair(-self.eta, -self.v, self.grid)

    def shift_cells(self, m: int) -> "FieldPair":
        """Circular shift by m grid cells (to the right for m > 0)."""
        return FieldPair(np.roll(self.eta, m), np.roll(self.v, m), self.grid)

    def reversed_velocity(self) -> "FieldPair":
        return FieldPair(self.eta, -self.v, self.grid)

    @property
    def max_eta(self) -> float:
        return float(np.max(self.eta))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.eta)) and np.all(np.isfinite(self.v)))


class HydroField(FieldPair):
    """A field in the non-vanishing set: finite samples and max eta < 1 - margin."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.is_finite():
            raise NonFinite("field contains non-finite samples")
        require_nonvacuum(self)

    @classmethod
    def of(cls, pair: FieldPair) -> "HydroField":
        return cls(pair.eta, pair.v, pair.grid)


FieldLike = Union[FieldPair, HydroField]


def require_nonvacuum(field: FieldPair, margin: float | None = None) -> None:
    margin = get_settings().solver.vacuum_margin if margin is None else margin
    peak = field.max_eta
    if not peak < 1.0 - margin:
        raise VacuumBreach("max eta reached the vacuum threshold", max_eta=peak, margin=margin)


def derivative(
    u: np.ndarray, grid: Grid, order: int = 1, method: DerivativeMethod = "spectral"
) -> np.ndarray:
    """d^order u / dx^order on the periodic grid."""
    if order == 0:
        return np.asarray(u, dtype=float)
    if method == "fd":
        out = np.asarray(u, dtype=float)
        for _ in range(order // 2):
            out = (np.roll(out, -1) - 2.0 * out + np.roll(out, 1)) / grid.dx ** 2
        if order % 2:
            out = (np.roll(out, -1) - np.roll(out, 1)) / (2.0 * grid.dx)
        return out
    multiplier = (1j * grid.k) ** order
    if order % 2:
        multiplier[-1] = 0.0
    return fft.irfft(fft.rfft(u) * multiplier, n=grid.n)


def integrate(u: np.ndarray, grid: Grid) -> float:
    return float(np.sum(u) * grid.dx)


def inner(a: FieldPair, b: FieldPair) -> float:
    """L^2 x L^2 inner product."""
    return integrate(a.eta * b.eta + a.v * b.v, a.grid)


def translate(field: FieldPair, shift: float) -> FieldPair:
    """Spectral translation x -> x - shift (sub-cell shifts allowed)."""
    phase = np.exp(-1j * field.grid.k * shift)
    phase[-1] = np.cos(field.grid.k[-1] * shift)
    n = field.grid.n
    return FieldPair(
        fft.irfft(fft.rfft(field.eta) * phase, n=n),
        fft.irfft(fft.rfft(field.v) * phase, n=n),
        field.grid,
    )


def x_norm(field: FieldPair, method: DerivativeMethod = "spectral") -> float:
    """||eta||_{H^1}^2 + ||v||_{L^2}^2, square-rooted."""
    grid = field.grid
    d_eta = derivative(field.eta, grid, 1, method)
    return float(np.sqrt(integrate(field.eta ** 2 + d_eta ** 2 + field.v ** 2, grid)))


def energy(field: FieldPair, nl: Nonlinearity, method: DerivativeMethod = "spectral") -> float:
    """E = 1/8 int (eta')^2/(1-eta) + 1/2 int (1-eta) v^2 + 1/2 int F(1-eta)."""
    require_nonvacuum(field)
    grid = field.grid
    rho = 1.0 - field.eta
    d_eta = derivative(field.eta, grid, 1, method)
    density = d_eta ** 2 / (8.0 * rho) + 0.5 * rho * field.v ** 2 + 0.5 * nl.F(rho)
    return integrate(density, grid)


def momentum(field: FieldPair) -> float:
    """p = 1/2 int eta v."""
    return 0.5 * integrate(field.eta * field.v, field.grid)


def grad_energy(
    field: FieldPair, nl: Nonlinearity, method: DerivativeMethod = "spectral"
) -> FieldPair:
    """L^2 representative of dE, integration by parts applied to the eta' term."""
    require_nonvacuum(field)
    grid = field.grid
    rho = 1.0 - field.eta
    d_eta = derivative(field.eta, grid, 1, method)
    g_eta = (
        -derivative(d_eta / (4.0 * rho), grid, 1, method)
        + d_eta ** 2 / (8.0 * rho ** 2)
        + 0.5 * (nl.f(rho) - field.v ** 2)
    )
    return FieldPair(g_eta, rho * field.v, grid)


def grad_momentum(field: FieldPair) -> FieldPair:
    return FieldPair(0.5 * field.v, 0.5 * field.eta, field.grid)


def momentum_pairing(w: FieldPair, eps: FieldPair) -> float:
    """grad p(w) . eps = 1/2 int (w_v eps_eta + w_eta eps_v)."""
    return 0.5 * integrate(w.v * eps.eta + w.eta * eps.v, w.grid)


def hessian_energy_apply(
    field: FieldPair, eps: FieldPair, nl: Nonlinearity, method: DerivativeMethod = "spectral"
) -> FieldPair:
    """Apply the (symmetric) second derivative of E at ``field`` to ``eps``."""
    require_nonvacuum(field)
    grid = field.grid
    rho = 1.0 - field.eta
    d_eta = derivative(field.eta, grid, 1, method)
    d_eps = derivative(eps.eta, grid, 1, method)
    a = d_eta ** 2 / (4.0 * rho ** 3) - 0.5 * nl.df(rho)
    b = d_eta / (4.0 * rho ** 2)
    kin = 1.0 / (4.0 * rho)
    out_eta = (
        a * eps.eta
        + b * d_eps
        - derivative(b * eps.eta, grid, 1, method)
        - derivative(kin * d_eps, grid, 1, method)
        - field.v * eps.v
    )
    out_v = rho * eps.v - field.v * eps.eta
    return FieldPair(out_eta, out_v, grid)


def hessian_momentum_apply(eps: FieldPair) -> FieldPair:
    """Second derivative of p: <H_p eps, eps> = int eps_eta eps_v."""
    return FieldPair(0.5 * eps.v, 0.5 * eps.eta, eps.grid)


def quadratic_form_direct(
    field: FieldPair, eps: FieldPair, nl: Nonlinearity, method: DerivativeMethod = "spectral"
) -> float:
    """d^2 E(field)(eps, eps) evaluated as a pointwise quadrature."""
    require_nonvacuum(field)
    grid = field.grid
    rho = 1.0 - field.eta
    d_eta = derivative(field.eta, grid, 1, method)
    d_eps = derivative(eps.eta, grid, 1, method)
    density = (
        d_eta ** 2 * eps.eta ** 2 / (4.0 * rho ** 3)
        + d_eta * eps.eta * d_eps / (2.0 * rho ** 2)
        + d_eps ** 2 / (4.0 * rho)
        + rho * eps.v ** 2
        - 2.0 * field.v * eps.eta * eps.v
        - 0.5 * nl.df(rho) * eps.eta ** 2
    )
    return integrate(density, grid)
