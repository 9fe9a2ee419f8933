"""
The linearized operator H_c = d^2(E - c p)(Q_c) and its spectrum.

H_c acts on stacked samples (eps_eta, eps_v). The upper-left block is the
Sturm-Liouville operator

    -d/dx (K d/dx) + V,   K = 1 / (4 (1 - eta_c)),
    V = -(c^2 + 2F + 2(1-eta_c) f + 2(1-eta_c)^2 f') / (4 (1-eta_c)^2) + c^2 / (4 (1-eta_c)^3),

with F, f, f' evaluated at 1 - eta_c. The last term of V comes from the
velocity-velocity coupling; dropping it leaves the Schur complement of the
lower-right block. The coupling blocks are -c / (2 (1 - eta_c)) and the
lower-right block is (1 - eta_c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from darksol.config.settings import get_settings
from darksol.core.exceptions import SolverFail
from darksol.core.field_ops import FieldPair, Grid, grad_momentum, require_nonvacuum
from darksol.core.nonlinearity import Nonlinearity, sound_speed
from darksol.core.profile import SolitonProfile
from darksol.utils.monitoring import get_logger, metrics

logger = get_logger(__name__)

KineticScheme = Literal["stencil", "spectral"]


@dataclass(frozen=True, eq=False)
class HcOperator:
    """Sparse symmetric discretization of H_c on a periodic grid."""

    profile: SolitonProfile = field(repr=False)
    nl: Nonlinearity
    kinetic: KineticScheme
    matrix: sparse.csr_array = field(repr=False)
    first_difference: sparse.csr_array = field(repr=False)

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, eps: FieldPair) -> FieldPair:
        return FieldPair.from_stacked(self.matrix @ eps.stacked(), self.grid)

    def quadratic_form(self, eps: FieldPair) -> float:
        vector = eps.stacked()
        return float(vector @ (self.matrix @ vector)) * self.grid.dx

    def symmetry_defect(self) -> float:
        diff = self.matrix - self.matrix.T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def gram(self) -> sparse.csr_array:
        """Gram matrix of the X norm in the same discretization."""
        n = self.grid.n
        d = self.first_difference
        upper = sparse.identity(n, format="csr") + (d.T @ d)
        return sparse.block_diag([upper, sparse.identity(n)], format="csr")


def spectral_derivative_matrix(grid: Grid) -> np.ndarray:
    """Dense circulant matrix of the spectral first derivative."""
    n = grid.n
    modes = 1j * np.asarray(grid.k)
    modes[-1] = 0.0
    impulse = np.zeros(n)
    impulse[0] = 1.0
    column = np.fft.irfft(np.fft.rfft(impulse) * modes, n=n)
    return linalg.circulant(column)


def _forward_difference(grid: Grid) -> sparse.csr_array:
    n = grid.n
    d = sparse.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
    d[n - 1, 0] = 1.0
    return sparse.csr_array(d / grid.dx)


def potential(nl: Nonlinearity, c: float, eta: np.ndarray) -> np.ndarray:
    rho = 1.0 - eta
    bracket = c * c + 2.0 * nl.F(rho) + 2.0 * rho * nl.f(rho) + 2.0 * rho ** 2 * nl.df(rho)
    return -bracket / (4.0 * rho ** 2) + c * c / (4.0 * rho ** 3)


def assemble_hc(
    profile: SolitonProfile, nl: Nonlinearity, kinetic: KineticScheme = "stencil"
) -> HcOperator:
    """Assemble H_c for a sampled profile."""
    require_nonvacuum(profile.field)
    grid = profile.grid
    c = profile.c
    eta = profile.eta
    rho = 1.0 - eta

    if kinetic == "stencil":
        # K at half nodes, sampled from the continuous profile
        half = profile.shape.eta(grid.wrap(grid.x + 0.5 * grid.dx))
        diff = _forward_difference(grid)
        kin = diff.T @ sparse.diags(1.0 / (4.0 * (1.0 - half))) @ diff
    else:
        dense = spectral_derivative_matrix(grid)
        kin = sparse.csr_array(dense.T @ (dense / (4.0 * rho)[:, None]))
        diff = sparse.csr_array(dense)

    upper = sparse.csr_array(kin) + sparse.diags(potential(nl, c, eta))
    coupling = sparse.diags(-c / (2.0 * rho))
    lower = sparse.diags(rho)
    matrix = sparse.csr_array(sparse.bmat([[upper, coupling], [coupling, lower]], format="csr"))
    # symmetrize round-off from the dense product
    matrix = sparse.csr_array(0.5 * (matrix + matrix.T))
    logger.debug("assembled H_c", c=c, n=grid.n, kinetic=kinetic, nnz=matrix.nnz)
    return HcOperator(profile=profile, nl=nl, kinetic=kinetic, matrix=matrix, first_difference=diff)


def essential_spectrum_floor(nl: Nonlinearity, c: float) -> float:
    """(c_s^2 - c^2) / (1 + c_s^2 + sqrt((1 - c_s^2)^2 + 4 c^2))."""
    c_s2 = sound_speed(nl) ** 2
    return (c_s2 - c * c) / (1.0 + c_s2 + math.sqrt((1.0 - c_s2) ** 2 + 4.0 * c * c))


def symbol_floor(nl: Nonlinearity, c: float) -> float:
    """Smallest eigenvalue of the constant-coefficient symbol of H_c at eta = 0.

    Coincides with :func:`essential_spectrum_floor` when c_s^2 = 2.
    """
    c_s2 = sound_speed(nl) ** 2
    return 2.0 * (c_s2 - c * c) / (c_s2 + 4.0 + math.sqrt((c_s2 - 4.0) ** 2 + 16.0 * c * c))


def _pointwise_lower_bound(op: HcOperator) -> float:
    """Below the spectrum: the kinetic part is nonnegative."""
    v_pot = potential(op.nl, op.profile.c, op.profile.eta)
    rho = 1.0 - op.profile.eta
    b = op.profile.c / (2.0 * rho)
    mean = 0.5 * (v_pot + rho)
    radius = np.sqrt(0.25 * (v_pot - rho) ** 2 + b ** 2)
    return float(np.min(mean - radius))


def low_spectrum(op: HcOperator, m: int = 4) -> list[tuple[float, FieldPair]]:
    """The m smallest eigenpairs of H_c, ascending."""
    if not 1 <= m <= 10:
        raise SolverFail("low_spectrum supports 1 <= m <= 10", m=m)
    grid = op.grid
    if op.size <= get_settings().solver.dense_eig_limit:
        values, vectors = linalg.eigh(op.matrix.toarray(), subset_by_index=[0, m - 1])
        metrics.increment_eigen_solves("dense")
    else:
        shift = _pointwise_lower_bound(op) - 0.1
        try:
            values, vectors = sparse_linalg.eigsh(op.matrix.tocsc(), k=m, sigma=shift, which="LM")
        except sparse_linalg.ArpackNoConvergence as exc:
            raise SolverFail("shift-invert eigensolver did not converge", m=m) from exc
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
        metrics.increment_eigen_solves("shift_invert")
    return [(float(values[i]), FieldPair.from_stacked(vectors[:, i], grid)) for i in range(m)]


def _constraint_basis(op: HcOperator) -> np.ndarray:
    samples = op.profile.samples()
    grid = op.grid
    translation = FieldPair(samples.deta, samples.dv, grid)
    gauge = grad_momentum(op.profile.field)
    return np.column_stack([translation.stacked(), gauge.stacked()])


def constrained_coercivity(op: HcOperator, constrained: bool = True) -> float:
    """Smallest Rayleigh quotient <H_c eps, eps> / ||eps||_X^2.

    With ``constrained`` the minimum is taken over eps orthogonal in L^2 x L^2
    to d_x Q_c and grad p(Q_c).
    """
    gram = op.gram()
    basis = _constraint_basis(op)
    if op.size <= get_settings().solver.dense_eig_limit:
        a = op.matrix.toarray()
        g = gram.toarray()
        if constrained:
            z = linalg.null_space(basis.T)
            a = z.T @ a @ z
            g = z.T @ g @ z
        value = linalg.eigh(a, g, eigvals_only=True, subset_by_index=[0, 0])[0]
        metrics.increment_eigen_solves("dense_generalized")
        return float(value)

    rng = np.random.default_rng(0)
    start = rng.standard_normal((op.size, 4))
    constraints: Optional[np.ndarray] = None
    if constrained:
        solve = sparse_linalg.splu(gram.tocsc()).solve
        constraints = np.column_stack([solve(basis[:, j]) for j in range(basis.shape[1])])
    values, _ = sparse_linalg.lobpcg(
        op.matrix, start, B=gram, Y=constraints, largest=False, tol=1e-8, maxiter=2000
    )
    metrics.increment_eigen_solves("lobpcg")
    if not np.all(np.isfinite(values)):
        raise SolverFail("lobpcg returned non-finite eigenvalues")
    return float(np.min(values))


def reflect(u: np.ndarray) -> np.ndarray:
    """u(-x) on a grid with nodes -L/2 + j dx."""
    return np.roll(u[::-1], 1)


def parity_defect(u: np.ndarray) -> float:
    norm = float(np.linalg.norm(u))
    return float(np.linalg.norm(u - reflect(u))) / norm if norm else 0.0


def alignment(a: FieldPair, b: FieldPair) -> float:
    """|cos| of the L^2 angle between two fields."""
    va, vb = a.stacked(), b.stacked()
    return float(abs(va @ vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))


class SpectrumReport(BaseModel):
    """Low spectrum of H_c with its diagnostics."""

    c: float
    n: int
    length: float
    kinetic: str
    eigenvalues: list[float]
    floor: float
    symbol_floor: float
    l_c: float
    unconstrained_min: float
    negative_count: int
    kernel_alignment: float
    negative_parity_defect: float
    symmetry_defect: float = Field(description="max |A - A^T|")


def spectrum_report(op: HcOperator, m: int = 4) -> SpectrumReport:
    """Run the eigensolvers and collect the standard diagnostics."""
    pairs = low_spectrum(op, m)
    values = [value for value, _ in pairs]
    samples = op.profile.samples()
    translation = FieldPair(samples.deta, samples.dv, op.grid)
    scale = max(1.0, abs(values[0]))
    negative = sum(1 for value in values if value < -1e-6 * scale)
    kernel = alignment(pairs[1][1], translation) if m >= 2 else float("nan")
    c = op.profile.c
    report = SpectrumReport(
        c=c,
        n=op.grid.n,
        length=op.grid.length,
        kinetic=op.kinetic,
        eigenvalues=values,
        floor=essential_spectrum_floor(op.nl, c),
        symbol_floor=symbol_floor(op.nl, c),
        l_c=constrained_coercivity(op, constrained=True),
        unconstrained_min=constrained_coercivity(op, constrained=False),
        negative_count=negative,
        kernel_alignment=kernel,
        negative_parity_defect=parity_defect(pairs[0][1].eta),
        symmetry_defect=op.symmetry_defect(),
    )
    logger.info("spectrum computed", c=c, lambda_min=values[0], l_c=report.l_c)
    return report
