"""
Command-line entry point.

Exit codes: 0 when every check passes, 1 when a verdict fails, 2 for
configuration errors and 3 for any other domain error.
"""

from pathlib import Path
from typing import Callable, List, Optional

import typer

from cli.commands.experiments import resolve
from cli.utils.output import print_outcome, print_sweep
from darksol.core.exceptions import DarksolError
from darksol.experiments.io import load_config
from darksol.experiments.runners import run, run_sweep
from darksol.experiments.schemas import ExperimentBase
from darksol.utils.monitoring import console, setup_logging

app = typer.Typer(help="Dark-soliton chain stability laboratory.", no_args_is_help=True)

ConfigOption = typer.Option(None, "--config", help="JSON manifest (overrides flags)")
NlOption = typer.Option('{"kind": "gp"}', "--nl", help="Nonlinearity as JSON")
GridOption = typer.Option("2048,200", "--grid", help="n,length")
OutOption = typer.Option(Path("."), "--out", help="Existing output directory")
PrefixOption = typer.Option(None, "--prefix", help="Artifact file prefix")


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Override the log level"),
    json_logs: bool = typer.Option(False, "--json-logs", help="Render logs as JSON"),
) -> None:
    setup_logging(level=log_level, fmt="json" if json_logs else None)


def _execute(build: Callable[[], ExperimentBase]) -> None:
    try:
        manifest: ExperimentBase = build()
        outcome = run(manifest)
    except DarksolError as exc:
        console.print(f"[red]ERROR[/red] {type(exc).__name__}: {exc}")
        raise typer.Exit(exc.exit_code)
    print_outcome(outcome)
    raise typer.Exit(outcome.exit_code)


@app.command()
def profile(
    c: float = typer.Option(1.0, "--c", help="Soliton speed"),
    config: Optional[Path] = ConfigOption,
    nl: str = NlOption,
    grid: str = GridOption,
    out: Path = OutOption,
    prefix: Optional[str] = PrefixOption,
) -> None:
    """Compute a soliton profile and its momentum."""
    _execute(lambda: resolve("profile", config, nl, grid, out, prefix, {"c": c}))


@app.command()
def spectrum(
    c: float = typer.Option(1.0, "--c", help="Soliton speed"),
    m: int = typer.Option(4, "--m", help="Number of eigenpairs"),
    kinetic: str = typer.Option("stencil", "--kinetic", help="stencil or spectral"),
    config: Optional[Path] = ConfigOption,
    nl: str = NlOption,
    grid: str = GridOption,
    out: Path = OutOption,
    prefix: Optional[str] = PrefixOption,
) -> None:
    """Low spectrum, essential floor and coercivity of the linearized operator."""
    _execute(lambda: resolve("spectrum", config, nl, grid, out, prefix,
                             {"c": c, "m": m, "kinetic": kinetic}))


@app.command()
def evolve(
    config: Path = typer.Option(..., "--config", help="JSON manifest"),
) -> None:
    """Evolve initial data with conservation monitoring."""
    _execute(lambda: resolve("evolve", config, "", "", Path("."), None, {}))


@app.command("chain-stability")
def chain_stability(
    speeds: Optional[List[float]] = typer.Option(None, "--speed", help="Repeat for each soliton"),
    gap: float = typer.Option(60.0, "--gap", help="Initial separation"),
    alpha0: Optional[List[float]] = typer.Option(None, "--alpha0", help="Repeat to sweep"),
    t_end: float = typer.Option(100.0, "--t-end"),
    snapshot_dt: float = typer.Option(1.0, "--snapshot-dt"),
    config: Optional[Path] = ConfigOption,
    nl: str = NlOption,
    grid: str = typer.Option("8192,800", "--grid", help="n,length"),
    out: Path = OutOption,
    prefix: Optional[str] = PrefixOption,
) -> None:
    """Perturbed chain evolution with tracking, monotonicity and stability reports."""
    extra = {
        "speeds": speeds or [1.2, 1.3],
        "gap": gap,
        "alpha0": alpha0 if alpha0 and len(alpha0) > 1 else (alpha0[0] if alpha0 else None),
        "t_end": t_end,
        "snapshot_dt": snapshot_dt,
    }
    _execute(lambda: resolve("chain-stability", config, nl, grid, out, prefix, extra))


@app.command("verify-appendix")
def verify_appendix(
    draws: int = typer.Option(10_000, "--draws", help="Random cross-term draws"),
    config: Optional[Path] = ConfigOption,
    nl: str = NlOption,
    grid: str = typer.Option("4096,400", "--grid", help="n,length"),
    out: Path = OutOption,
    prefix: Optional[str] = PrefixOption,
) -> None:
    """Interaction estimates, Lipschitz, vacuum-margin and Taylor checks."""
    _execute(lambda: resolve("verify-appendix", config, nl, grid, out, prefix, {"crossterm_draws": draws}))


@app.command("run")
def run_manifests(
    manifests: List[Path] = typer.Argument(..., help="JSON manifests"),
    sweep: bool = typer.Option(False, "--sweep", help="Run manifests concurrently"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker cap (<= DARKSOL_THREADS)"),
) -> None:
    """Run one or more manifests of any kind."""
    try:
        configs = [load_config(path) for path in manifests]
    except DarksolError as exc:
        console.print(f"[red]ERROR[/red] {type(exc).__name__}: {exc}")
        raise typer.Exit(exc.exit_code)
    if sweep:
        outcomes = run_sweep(configs, threads)
    else:
        outcomes = []
        for config in configs:
            try:
                outcomes.append(run(config))
            except DarksolError as exc:
                console.print(f"[red]ERROR[/red] {type(exc).__name__}: {exc}")
                raise typer.Exit(exc.exit_code)
    for outcome in outcomes:
        print_outcome(outcome)
    if len(outcomes) > 1:
        print_sweep(outcomes)
    raise typer.Exit(max(outcome.exit_code for outcome in outcomes))


if __name__ == "__main__":
    app()
