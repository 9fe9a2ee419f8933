"""Partitions of unity around a soliton chain, localized momenta and G."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from darksol.core.exceptions import BadOrdering
from darksol.core.field_ops import FieldPair, Grid, energy, integrate
from darksol.core.nonlinearity import Nonlinearity


def tanh_step(x: np.ndarray, center: float, rate: float, order: int = 0) -> np.ndarray:
    """x-derivative of order 0..3 of (1 + tanh(rate (x - center))) / 2."""
    z = rate * (np.asarray(x, dtype=float) - center)
    th = np.tanh(z)
    sech2 = 1.0 - th * th
    if order == 0:
        return 0.5 * (1.0 + th)
    if order == 1:
        return 0.5 * rate * sech2
    if order == 2:
        return -rate ** 2 * sech2 * th
    if order == 3:
        return rate ** 3 * sech2 * (2.0 * th * th - sech2)
    raise ValueError(f"unsupported derivative order {order}")


def default_rates(nu_star: float) -> tuple[float, float]:
    """(tau, tau0) = (nu*/8, nu*/16)."""
    return nu_star / 8.0, nu_star / 16.0


@dataclass(frozen=True, eq=False)
class CutoffFamily:
    """Phi_k, Phi_{k,k+1} (rate tau) and chi_k (rate tau0) for positions a."""

    a: tuple[float, ...]
    L: float
    tau: float
    tau0: float
    grid: Grid

    def __post_init__(self) -> None:
        positions = np.asarray(self.a, dtype=float)
        if positions.size == 0 or np.any(np.diff(positions) <= 0.0):
            raise BadOrdering("cutoff positions must be strictly increasing", a=list(self.a))
        if not (0.0 < self.tau0 < 2.0 * self.tau):
            raise BadOrdering("cutoff rates must satisfy 0 < tau0 < 2 tau", tau=self.tau, tau0=self.tau0)

    @property
    def N(self) -> int:
        return len(self.a)

    def _step(self, center: float, order: int = 0) -> np.ndarray:
        return tanh_step(self.grid.x, center, self.tau, order)

    def phi(self, k: int, order: int = 0) -> np.ndarray:
        """Phi_k, 1 <= k <= N."""
        center = self.a[k - 1]
        return self._step(center - 0.25 * self.L, order) - self._step(center + 0.25 * self.L, order)

    def phi_pair(self, k: int, order: int = 0) -> np.ndarray:
        """Phi_{k,k+1}, 0 <= k <= N."""
        n = self.N
        if k == 0:
            lead = np.ones(self.grid.n) if order == 0 else np.zeros(self.grid.n)
            return lead - self._step(self.a[0] - 0.25 * self.L, order)
        if k == n:
            return self._step(self.a[-1] + 0.25 * self.L, order)
        return self._step(self.a[k - 1] + 0.25 * self.L, order) - self._step(self.a[k] - 0.25 * self.L, order)

    def chi_center(self, k: int) -> Optional[float]:
        if k in (1, self.N + 1):
            return None
        return 0.5 * (self.a[k - 1] + self.a[k - 2])

    def chi(self, k: int, order: int = 0) -> np.ndarray:
        """chi_k, 1 <= k <= N + 1, with chi_1 = 1 and chi_{N+1} = 0."""
        n = self.grid.n
        if k == 1:
            return np.ones(n) if order == 0 else np.zeros(n)
        if k == self.N + 1:
            return np.zeros(n)
        return tanh_step(self.grid.x, self.chi_center(k), self.tau0, order)

    @cached_property
    def phis(self) -> np.ndarray:
        return np.stack([self.phi(k) for k in range(1, self.N + 1)])

    @cached_property
    def phi_pairs(self) -> np.ndarray:
        return np.stack([self.phi_pair(k) for k in range(0, self.N + 1)])

    @cached_property
    def chis(self) -> np.ndarray:
        return np.stack([self.chi(k) for k in range(1, self.N + 2)])

    def partition_defect(self) -> float:
        total = self.phis.sum(axis=0) + self.phi_pairs.sum(axis=0)
        return float(np.max(np.abs(total - 1.0)))

    def chi_window(self, k: int) -> np.ndarray:
        return self.chis[k - 1] - self.chis[k]


def build_cutoffs(
    a: Sequence[float], L: float, tau: float, tau0: float, grid: Grid
) -> CutoffFamily:
    return CutoffFamily(tuple(float(x) for x in a), float(L), float(tau), float(tau0), grid)


def _density(field: FieldPair) -> np.ndarray:
    return 0.5 * field.eta * field.v


def localized_momentum(field: FieldPair, cutoffs: CutoffFamily, k: int) -> float:
    """p_k = int (eta v / 2)(chi_k - chi_{k+1})."""
    return integrate(_density(field) * cutoffs.chi_window(k), field.grid)


def tilde_momentum(field: FieldPair, cutoffs: CutoffFamily, k: int) -> float:
    """p~_k = int (eta v / 2) chi_k, the momentum to the right of soliton k - 1."""
    return integrate(_density(field) * cutoffs.chis[k - 1], field.grid)


def localized_momenta(field: FieldPair, cutoffs: CutoffFamily) -> np.ndarray:
    return np.array([localized_momentum(field, cutoffs, k) for k in range(1, cutoffs.N + 1)])


def functional_G(
    field: FieldPair, nl: Nonlinearity, c_star: Sequence[float], cutoffs: CutoffFamily
) -> float:
    """G = E - sum_k c*_k p_k, always with the reference speeds c*."""
    if len(c_star) != cutoffs.N:
        raise BadOrdering("one reference speed per cutoff window is required", N=cutoffs.N)
    return energy(field, nl) - float(np.dot(c_star, localized_momenta(field, cutoffs)))
