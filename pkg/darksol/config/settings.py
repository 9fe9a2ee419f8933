"""
Settings configuration for the dark-soliton lab.

This module handles all configuration settings using Pydantic Settings,
which automatically loads from environment variables prefixed ``DARKSOL_``.
"""

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class LoggingSettings(BaseModel):
    """Logging configuration settings."""

    level: str = Field(
        default="INFO",
        description="Log level"
    )
    format: Literal["console", "json"] = Field(
        default="console",
        description="Log renderer"
    )
    file: Optional[str] = Field(
        default=None,
        description="Optional rotating log file path"
    )
    rotation: str = Field(
        default="10MB",
        description="Log rotation size"
    )


class SolverSettings(BaseModel):
    """Numerical tolerances shared by the core solvers."""

    hypothesis_tol: float = Field(
        default=1e-12,
        gt=0,
        description="Absolute tolerance for the standing hypotheses on f"
    )
    xi_scan_points: int = Field(
        default=10_000,
        ge=100,
        description="Uniform scan size used to bracket the first zero of N_c"
    )
    xi_tol: float = Field(
        default=1e-13,
        gt=0,
        description="Root tolerance for the peak amplitude"
    )
    ode_rtol: float = Field(
        default=1e-13,
        gt=0,
        description="Relative tolerance of the profile ODE"
    )
    ode_atol: float = Field(
        default=1e-15,
        gt=0,
        description="Absolute tolerance of the profile ODE"
    )
    tail_floor_ratio: float = Field(
        default=1e-10,
        gt=0,
        lt=1,
        description="Amplitude ratio below which the exponential tail takes over"
    )
    vacuum_margin: float = Field(
        default=1e-6,
        gt=0,
        description="Fields with max eta >= 1 - margin are rejected"
    )
    cfl_lambda: float = Field(
        default=0.2,
        gt=0,
        le=0.25,
        description="Default dt / dx^2 ratio for RK4"
    )
    newton_max_iter: int = Field(
        default=50,
        ge=1,
        description="Newton iterations for the chain decomposition"
    )
    newton_tol: float = Field(
        default=1e-12,
        gt=0,
        description="Absolute orthogonality residual tolerance"
    )
    newton_max_halvings: int = Field(
        default=8,
        ge=0,
        description="Step halvings allowed per Newton iteration"
    )
    fd_step_ratio: float = Field(
        default=1e-3,
        gt=0,
        description="Speed finite-difference step as a fraction of c_s - c"
    )
    dense_eig_limit: int = Field(
        default=4096,
        ge=32,
        description="Largest matrix size handled by dense eigensolvers"
    )


class OutputSettings(BaseModel):
    """Artifact configuration settings."""

    float_format: str = Field(
        default="%.17g",
        description="printf-style float format used in CSV files"
    )


class Settings(BaseSettings):
    """Main settings class that loads all configuration."""

    model_config = SettingsConfigDict(
        env_prefix="DARKSOL_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
    )

    # Environment
    environment: str = Field(
        default="development",
        description="Environment (development, ci, production)"
    )
    debug: bool = Field(
        default=False,
        description="Enable debug mode"
    )
    threads: int = Field(
        default=4,
        ge=1,
        description="Worker threads available to --sweep"
    )

    # Component settings
    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)

    @field_validator("threads")
    @classmethod
    def _cap_threads(cls, value: int) -> int:
        return min(value, 256)


# Create global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Return the process-wide settings instance."""
    return settings


def reload_settings() -> Settings:
    """Rebuild settings from the current environment (used by tests and the CLI)."""
    global settings
    settings = Settings()
    return settings
