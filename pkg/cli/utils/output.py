"""Console rendering of run outcomes."""

from rich.table import Table

from darksol.experiments.runners import RunOutcome
from darksol.utils.monitoring import console


def print_outcome(outcome: RunOutcome) -> None:
    """One verdict line per check, then the artifacts."""
    if outcome.error is not None:
        console.print(f"[red]ERROR[/red] {outcome.kind}: {outcome.error}")
        return
    for verdict in outcome.verdicts:
        tag = "[green]PASS[/green]" if verdict.passed else "[red]FAIL[/red]"
        console.print(f"{tag} {verdict.name} {verdict.detail}".rstrip())
    for path in outcome.artifacts:
        console.print(f"  wrote {path}", style="dim")


def print_sweep(outcomes: list[RunOutcome]) -> None:
    table = Table(title="Sweep")
    table.add_column("#", justify="right")
    table.add_column("kind")
    table.add_column("checks")
    table.add_column("exit", justify="right")
    for index, outcome in enumerate(outcomes):
        passed = sum(v.passed for v in outcome.verdicts)
        table.add_row(str(index), outcome.kind, f"{passed}/{len(outcome.verdicts)}", str(outcome.exit_code))
    console.print(table)
