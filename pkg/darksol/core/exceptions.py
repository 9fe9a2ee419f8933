"""
Exception hierarchy for the dark-soliton lab.

Every domain failure derives from :class:`DarksolError`, which carries a
structured ``context`` dict (logged verbatim) and the process exit code the
CLI maps it to.
"""

from typing import Any, Dict


class DarksolError(Exception):
    """Base class for all domain errors."""

    exit_code: int = 3

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class DefocusingViolated(DarksolError):
    """f'(1) >= 0: the equation is not defocusing."""


class H3Violated(DarksolError):
    """f''(1) + 3 f'(1) vanishes, so the transonic constants are undefined."""


class NoZero(DarksolError):
    """N_c has no zero in (0, 1): no dark soliton exists at this speed."""


class GridTooSmall(DarksolError):
    """The periodic box cannot hold the soliton tail."""


class VacuumBreach(DarksolError):
    """max eta reached the vacuum threshold 1 - margin."""


class BlowUpDetected(VacuumBreach):
    """The evolution reached the vacuum threshold."""


class NonFinite(DarksolError):
    """NaN or inf appeared in a field."""


class SolverFail(DarksolError):
    """An eigen- or ODE solver did not converge."""


class BadOrdering(DarksolError):
    """Speeds or positions are not strictly increasing."""


class NoConvergence(DarksolError):
    """Newton iteration for the chain decomposition did not converge."""


class BadPolynomial(DarksolError):
    """A coupling polynomial contains a pure monomial or constant term."""


class ConfigError(DarksolError):
    """Experiment configuration is invalid."""

    exit_code = 2
