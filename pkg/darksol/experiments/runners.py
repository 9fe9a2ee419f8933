"""
Experiment runners.

Each runner takes a validated manifest, writes its CSV and JSON artifacts
into the manifest's output directory and returns a :class:`RunOutcome`
with one verdict per check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import pandas as pd

from darksol.config.settings import get_settings
from darksol.core.evolution import (
    ConservationMonitor,
    EvolutionConfig,
    SnapshotCollector,
    dispersion_frequency,
    integrate,
    peak_position,
)
from darksol.core.exceptions import DarksolError, H3Violated
from darksol.core.field_ops import FieldPair, energy, momentum, x_norm
from darksol.core.linearization import assemble_hc, spectrum_report
from darksol.core.localization import build_cutoffs, default_rates
from darksol.core.modulation import (
    ChainSpec,
    build_chain,
    chain_derivatives,
    decompose,
    lipschitz_check,
    track,
    vacuum_margin,
)
from darksol.core.nonlinearity import check_hypotheses
from darksol.core.profile import (
    build_profile,
    delta_lower_bound,
    fitted_decay_rate,
    momentum_derivative,
    nc_value,
    profile_shape,
    soliton_momentum,
    transonic_ratios,
)
from darksol.experiments.io import ensure_output_dir, field_frame, read_field, write_csv, write_json
from darksol.experiments.schemas import (
    ChainStabilityExperiment,
    EvolveExperiment,
    ExperimentBase,
    ProfileExperiment,
    SpectrumExperiment,
    VerifyAppendixExperiment,
)
from darksol.services import diagnostics, estimates
from darksol.utils.monitoring import get_logger, metrics

logger = get_logger(__name__)


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RunOutcome:
    kind: str
    artifacts: list[Path] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    error: Optional[DarksolError] = None

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return self.error.exit_code
        return 0 if all(v.passed for v in self.verdicts) else 1

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.verdicts.append(Verdict(name, bool(passed), detail))
        metrics.record_check(name, bool(passed))
        return bool(passed)


def _prefix(config: ExperimentBase) -> Path:
    return ensure_output_dir(config.output.directory or ".") / config.output.prefix


def _finish(outcome: RunOutcome, config: ExperimentBase, path: Path, payload: dict[str, Any]) -> RunOutcome:
    payload = dict(payload)
    payload["config"] = config.model_dump(mode="json")
    payload["verdicts"] = [v.__dict__ for v in outcome.verdicts]
    payload["metrics"] = metrics.snapshot()
    outcome.artifacts.append(write_json(payload, path))
    return outcome


def run_profile(config: ProfileExperiment) -> RunOutcome:
    """Soliton profile table with momentum, energy and decay diagnostics."""
    prefix = _prefix(config)
    nl = config.nonlinearity.build()
    grid = config.grid.build()
    outcome = RunOutcome(kind=config.kind)

    profile = build_profile(nl, config.c, grid)
    samples = profile.samples()
    frame = pd.DataFrame({"x": grid.x, "eta": samples.eta, "v": samples.v,
                          "deta": samples.deta, "dv": samples.dv})
    outcome.artifacts.append(write_csv(frame, prefix.with_suffix(".profile.csv")))

    p_quad = soliton_momentum(nl, config.c)
    p_grid = momentum(profile.field)
    rate = fitted_decay_rate(profile.shape)
    first_integral = float(np.max(np.abs(samples.deta ** 2 + nc_value(nl, config.c, samples.eta))))
    payload: dict[str, Any] = {
        "c": profile.c,
        "xi_c": profile.xi_c,
        "nu_c": profile.nu_c,
        "p": p_quad,
        "p_grid": p_grid,
        "dp_dc": momentum_derivative(nl, config.c),
        "energy": energy(profile.field, nl),
        "delta_lower_bound": delta_lower_bound(nl, config.c),
        "fitted_decay_rate": rate,
        "boundary_value": profile.boundary_value,
        "first_integral_residual": first_integral,
        "hypotheses": check_hypotheses(nl).model_dump(mode="json"),
    }
    try:
        payload["transonic_ratios"] = transonic_ratios(nl, config.c)
    except H3Violated:
        payload["transonic_ratios"] = None
    outcome.check("momentum_consistency", abs(p_grid - p_quad) <= 1e-6 * max(1.0, abs(p_quad)),
                  f"grid {p_grid:.12g} vs quadrature {p_quad:.12g}")
    outcome.check("decay_rate", abs(rate - profile.nu_c) <= 0.01 * profile.nu_c,
                  f"fitted {rate:.6g} vs nu {profile.nu_c:.6g}")
    outcome.check("vacuum_bound", 1.0 - profile.xi_c >= payload["delta_lower_bound"] * (1.0 - 1e-9))
    outcome.check("first_integral", first_integral <= 1e-10, f"max |(eta')^2 + N_c(eta)| = {first_integral:.3e}")
    return _finish(outcome, config, prefix.with_suffix(".profile.json"), payload)


def run_spectrum(config: SpectrumExperiment) -> RunOutcome:
    """Low spectrum, floor and coercivity of H_c."""
    prefix = _prefix(config)
    nl = config.nonlinearity.build()
    grid = config.grid.build()
    outcome = RunOutcome(kind=config.kind)

    profile = build_profile(nl, config.c, grid)
    report = spectrum_report(assemble_hc(profile, nl, config.kinetic), config.m)
    frame = pd.DataFrame({"index": np.arange(len(report.eigenvalues)), "eigenvalue": report.eigenvalues})
    outcome.artifacts.append(write_csv(frame, prefix.with_suffix(".spectrum.csv")))

    outcome.check("single_negative_direction", report.negative_count == 1, f"{report.negative_count} negative")
    outcome.check("translation_kernel", abs(report.eigenvalues[1]) < 1e-4 and report.kernel_alignment > 0.999,
                  f"lambda_2 = {report.eigenvalues[1]:.3e}, |cos| = {report.kernel_alignment:.6f}")
    outcome.check("constrained_coercivity", report.l_c > 0.0, f"l_c = {report.l_c:.6g}")
    return _finish(outcome, config, prefix.with_suffix(".spectrum.json"), {"spectrum": report})


def _initial_field(config: EvolveExperiment) -> tuple[FieldPair, Optional[ChainSpec]]:
    nl = config.nonlinearity.build()
    grid = config.grid.build()
    initial = config.initial
    if initial.type == "file":
        return read_field(initial.path, grid), None
    spec = ChainSpec(tuple(initial.speeds), tuple(initial.positions))
    base: FieldPair = build_chain(spec, nl, grid)
    if initial.alpha > 0.0:
        bump = diagnostics.smooth_perturbation(grid, seed=config.seed, centers=initial.positions)
        base = base + initial.alpha * bump
    return base, spec


def run_evolve(config: EvolveExperiment) -> RunOutcome:
    """RK4 evolution with conservation monitoring."""
    prefix = _prefix(config)
    nl = config.nonlinearity.build()
    outcome = RunOutcome(kind=config.kind)
    start, _ = _initial_field(config)

    monitor = ConservationMonitor(nl)
    rows: list[dict[str, float]] = []

    def sample(t: float, current: FieldPair, step: int) -> None:
        rows.append({"t": t, "max_eta": current.max_eta, "peak": peak_position(current)})

    result = integrate(start, nl, config.evolution, [monitor, sample])
    frame = pd.DataFrame(rows)
    frame.insert(1, "E", monitor.energies)
    frame.insert(2, "p", monitor.momenta)
    series_path = Path(config.output.csv_path) if config.output.csv_path else prefix.with_suffix(".series.csv")
    outcome.artifacts.append(write_csv(frame, series_path))
    outcome.artifacts.append(write_csv(field_frame(result.field), prefix.with_suffix(".final.csv")))

    outcome.check("energy_conservation", monitor.energy_drift < 1e-6, f"drift {monitor.energy_drift:.3e}")
    outcome.check("momentum_conservation", monitor.momentum_drift < 1e-6, f"drift {monitor.momentum_drift:.3e}")
    end_e, end_p = diagnostics.energy_drift_check(start, result.field, nl)
    outcome.check("endpoint_drift", max(end_e, end_p) < 1e-6, f"E {end_e:.3e}, p {end_p:.3e}")
    payload: dict[str, Any] = {
        "t": result.t, "steps": result.steps, "dt": result.dt,
        "energy_drift": monitor.energy_drift, "momentum_drift": monitor.momentum_drift,
        "endpoint_drift": {"E": end_e, "p": end_p},
    }
    if config.dispersion_mode is not None:
        measured, predicted = dispersion_frequency(nl, config.grid.build(), mode=config.dispersion_mode)
        payload["dispersion"] = {"mode": config.dispersion_mode, "measured": measured, "predicted": predicted}
        outcome.check("dispersion", abs(measured - predicted) <= 1e-2 * predicted,
                      f"omega {measured:.6g} vs {predicted:.6g}")
    return _finish(outcome, config, prefix.with_suffix(".evolve.json"), payload)


def _chain_positions(speeds: Sequence[float], gap: float) -> tuple[float, ...]:
    n = len(speeds)
    return tuple((k - 0.5 * (n - 1)) * gap for k in range(n))


def chain_stability_run(config: ChainStabilityExperiment, alpha0: float) -> dict[str, Any]:
    """One perturbed-chain evolution with tracking and every time-series diagnostic."""
    nl = config.nonlinearity.build()
    grid = config.grid.build()
    spec = ChainSpec(tuple(config.speeds), _chain_positions(config.speeds, config.gap))
    spec.validate(nl)

    chain = build_chain(spec, nl, grid)
    start: FieldPair = chain
    if alpha0 > 0.0:
        bump = diagnostics.smooth_perturbation(grid, seed=config.seed, centers=spec.positions)
        start = chain + alpha0 * bump

    nu_star = min(profile_shape(nl, c).nu for c in spec.speeds)
    tau, tau0 = default_rates(nu_star)
    tau = config.tau or tau
    tau0 = config.tau0 or tau0

    evolution = EvolutionConfig(t_end=config.t_end, cfl_lambda=config.cfl_lambda, dealias=config.dealias)
    dt, _ = evolution.schedule(grid)
    evolution = evolution.model_copy(update={"snapshot_every": max(1, round(config.snapshot_dt / dt))})
    collector = SnapshotCollector()
    integrate(start, nl, evolution, [collector])

    tracked = track(collector.times, collector.fields, spec, nl)
    rows = []
    for t, snapshot, fit in zip(tracked.times, collector.fields, tracked.fits):
        cutoffs = build_cutoffs(fit.positions, config.gap, tau, tau0, grid)
        rec = diagnostics.record(snapshot, float(t), nl, cutoffs, spec.speeds, fit)
        row: dict[str, float] = {"t": rec.t}
        row.update({f"c_{k + 1}": c for k, c in enumerate(rec.c)})
        row.update({f"a_{k + 1}": a for k, a in enumerate(rec.a)})
        row.update({"eps_xnorm": rec.eps_xnorm, "residual": fit.residual_norm, "E": rec.E, "p": rec.p})
        row.update({f"p_tilde_{k + 1}": value for k, value in enumerate(rec.p_tilde)})
        row.update({"G": rec.G, "max_eta": rec.max_eta})
        rows.append(row)
    frame = pd.DataFrame(rows)

    stability = diagnostics.stability_report(tracked, collector.fields, spec.speeds, nl, alpha0, config.gap, tau0)
    monotonicity = None
    if len(rows) >= 2:
        p_tilde = frame[[f"p_tilde_{k + 1}" for k in range(spec.N)]].to_numpy()
        monotonicity = diagnostics.monotonicity_report(
            frame["t"].to_numpy(), p_tilde, config.gap, spec.sigma_star, tau0, g_series=frame["G"].to_numpy(),
        )
    return {
        "alpha0": alpha0,
        "frame": frame,
        "stability": stability,
        "monotonicity": monotonicity,
        "failure": tracked.failure,
        "initial_distance": x_norm(start - chain),
        "tau": tau,
        "tau0": tau0,
    }


def run_chain_stability(config: ChainStabilityExperiment) -> RunOutcome:
    """Perturbed chain evolution, tracking, monotonicity and stability for each alpha0."""
    prefix = _prefix(config)
    outcome = RunOutcome(kind=config.kind)
    runs = []
    for alpha0 in config.alphas:
        logger.info("chain stability run", alpha0=alpha0, speeds=config.speeds, gap=config.gap)
        result = chain_stability_run(config, alpha0)
        tag = f"{alpha0:.3g}"
        outcome.artifacts.append(write_csv(result.pop("frame"), prefix.with_suffix(f".alpha{tag}.csv")))
        outcome.check(f"tracking[{tag}]", result["failure"] is None, result["failure"] or "")
        stability = result["stability"]
        outcome.check(f"stability[{tag}]", bool(stability.passed),
                      f"ratio {stability.ratio}" if stability.ratio is not None else "")
        if result["monotonicity"] is not None:
            outcome.check(f"monotonicity[{tag}]", result["monotonicity"].passed)
        runs.append(result)

    scaling = diagnostics.alpha_halving([r["alpha0"] for r in runs], [r["stability"].sup_distance for r in runs])
    for entry in scaling:
        outcome.check(f"alpha_halving[{entry.alpha_large:.3g}->{entry.alpha_small:.3g}]", entry.passed,
                      f"factor {entry.factor:.3f} in [0.3, 0.8]")
    return _finish(outcome, config, prefix.with_suffix(".stability.json"), {"runs": runs, "scaling": scaling})


def run_verify_appendix(config: VerifyAppendixExperiment) -> RunOutcome:
    """Interaction estimates, expansions, virial identity, modulation matrix and auxiliary checks."""
    prefix = _prefix(config)
    nl = config.nonlinearity.build()
    grid = config.grid.build()
    outcome = RunOutcome(kind=config.kind)
    payload: dict[str, Any] = {}

    passed, total = estimates.crossterm_draws(config.crossterm_draws, seed=config.seed)
    payload["crossterm"] = {"passed": passed, "draws": total}
    outcome.check("crossterm_bound", passed == total, f"{passed}/{total}")

    m = len(config.speeds)
    fits = []
    for name in ("S2", "B", "B_tilde", "C", "D"):
        fit = estimates.polynomial_crossterm_check(
            nl, config.speeds, estimates.PRESETS[name](m), p=config.p, separations=config.separations,
        )
        fits.append(fit)
        outcome.check(f"polynomial[{fit.name}]", fit.passed, f"rate {fit.fitted_rate:.4g} vs {fit.expected_rate:.4g}")
    f_fit = estimates.f_expansion_residual(nl, config.near_sonic_speeds, p=config.p,
                                           separations=config.separations)
    fits.append(f_fit)
    outcome.check("f_expansion", f_fit.passed, f"rate {f_fit.fitted_rate:.4g} vs {f_fit.expected_rate:.4g}")
    payload["decay_fits"] = fits

    spec = ChainSpec(tuple(config.speeds), _chain_positions(config.speeds, config.separations[-1]))
    lip = lipschitz_check(spec, nl, grid, draws=config.lipschitz_draws, seed=config.seed)
    payload["lipschitz"] = lip
    outcome.check("lipschitz", math.isfinite(lip.k_max) and lip.spread <= 20.0, f"K in [{lip.k_min:.4g}, {lip.k_max:.4g}]")

    margin = vacuum_margin(spec, nl, grid)
    payload["vacuum_margin"] = margin
    outcome.check("vacuum_margin", margin.passed, f"max eta {margin.max_eta:.6g} <= beta* {margin.beta_star:.6g}")

    chain = build_chain(spec, nl, grid)
    virial = diagnostics.virial_suite(chain, nl, draws=config.virial_draws, seed=config.seed)
    payload["virial"] = virial
    outcome.check("virial_identity", virial.passed,
                  f"max relative mismatch {virial.max_relative_mismatch:.3e}, drift {virial.global_drift:.3e}")

    decay = diagnostics.expansion_tail_decay(config.speeds, nl, grid, config.separations)
    payload["expansion_decay"] = decay
    outcome.check("expansion_tail_decay", decay.passed,
                  f"rates E {decay.energy_rate:.4g}, p {decay.momentum_rate:.4g} vs {decay.expected_rate:.4g}")

    nu_star = min(profile_shape(nl, c).nu for c in spec.speeds)
    _, tau0 = default_rates(nu_star)
    # Phi windows at rate nu* leak at most exp(-nu* L / 2) onto the solitons, far below s^3
    cutoffs = build_cutoffs(spec.positions, config.separations[-1], nu_star, tau0, grid)
    raw = diagnostics.smooth_perturbation(grid, seed=config.seed, centers=spec.positions, width=2.0)
    eps = diagnostics.project_orthogonal(raw, chain_derivatives(spec, nl, grid))
    remainder = diagnostics.expansion_remainder_scaling(spec, nl, grid, (1.0 / x_norm(eps)) * eps, cutoffs)
    payload["expansion_remainder"] = remainder
    outcome.check("expansion_remainder", remainder.exponent >= 2.7, f"exponent {remainder.exponent:.3f}")

    perturbed = chain + 1e-3 * diagnostics.smooth_perturbation(grid, seed=config.seed, centers=spec.positions)
    matrix = diagnostics.modulation_matrix_check(perturbed, decompose(perturbed, spec, nl), nl)
    payload["modulation_matrix"] = matrix
    outcome.check("modulation_matrix", matrix.passed,
                  f"parity {matrix.parity_defect:.2e}, dp/dc {matrix.dp_dc_defect:.2e}, "
                  f"|H| {matrix.h_norm:.3e} vs {matrix.h_scale:.3e}")

    taylor = diagnostics.taylor_remainder_check(chain, nl, seed=config.seed)
    payload["taylor_remainder"] = taylor
    outcome.check("taylor_remainder", taylor.exponent >= 2.7, f"exponent {taylor.exponent:.3f}")

    hessian = diagnostics.momentum_hessian_bound(grid, seed=config.seed)
    payload["momentum_hessian"] = hessian
    outcome.check("momentum_hessian", hessian.passed, f"max ratio {hessian.max_ratio:.4f}")
    return _finish(outcome, config, prefix.with_suffix(".appendix.json"), payload)


RUNNERS: dict[str, Callable[[Any], RunOutcome]] = {
    "profile": run_profile,
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "chain-stability": run_chain_stability,
    "verify-appendix": run_verify_appendix,
}


def run(config: ExperimentBase) -> RunOutcome:
    """Dispatch on the manifest kind. Domain errors propagate."""
    kind = getattr(config, "kind")
    logger.info("experiment started", kind=kind)
    outcome = RUNNERS[kind](config)
    logger.info("experiment finished", kind=kind, exit_code=outcome.exit_code)
    return outcome


def _safe_run(config: ExperimentBase) -> RunOutcome:
    try:
        return run(config)
    except DarksolError as exc:
        logger.error("experiment failed", kind=getattr(config, "kind"), error=str(exc))
        return RunOutcome(kind=getattr(config, "kind"), error=exc)


def run_sweep(configs: Sequence[ExperimentBase], threads: Optional[int] = None) -> list[RunOutcome]:
    """Run independent manifests on a thread pool capped by ``settings.threads``."""
    cap = get_settings().threads
    workers = max(1, min(threads or cap, cap, len(configs) or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_safe_run, configs))
