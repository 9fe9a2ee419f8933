"""
Experiment manifests.

A manifest is a JSON document whose ``kind`` selects one of the experiment
models below. Validation failures surface as ConfigError.
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, Field, TypeAdapter, ValidationError, field_validator, model_validator

from darksol.core.evolution import EvolutionConfig
from darksol.core.exceptions import ConfigError
from darksol.core.field_ops import Grid
from darksol.core.nonlinearity import Nonlinearity, from_spec


class NonlinearitySpec(BaseModel):
    """Model nonlinearity f."""

    kind: Literal["gp", "poly_1mr", "cubic_quintic"] = Field(default="gp", description="Family")
    coeffs: Optional[list[float]] = Field(default=None, description="b_j in f = sum b_j (1 - rho)^j")
    a: Optional[float] = Field(default=None, description="Quintic weight for cubic_quintic")

    def build(self) -> Nonlinearity:
        return from_spec(self.model_dump(exclude_none=True))


class GridSpec(BaseModel):
    n: int = Field(..., description="Number of nodes (power of two)", ge=16)
    length: float = Field(..., description="Periodic domain length", gt=0)

    def build(self) -> Grid:
        return Grid(self.n, self.length)


class OutputSpec(BaseModel):
    directory: Optional[str] = Field(default=None, description="Existing, writable artifact directory")
    prefix: str = Field(default="run", description="File name prefix")
    csv_path: Optional[str] = Field(default=None, description="Explicit path of the evolve time-series CSV")

    @model_validator(mode="after")
    def _located(self) -> "OutputSpec":
        if self.directory is None:
            if self.csv_path is None:
                raise ValueError("output needs a directory or a csv_path")
            self.directory = str(Path(self.csv_path).parent)
        return self


def _strictly_increasing(values: list[float]) -> list[float]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("speeds must be strictly increasing")
    return values


class ExperimentBase(BaseModel):
    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    grid: GridSpec
    output: OutputSpec
    seed: int = Field(default=0, description="Seed of every random draw")


class ProfileExperiment(ExperimentBase):
    kind: Literal["profile"] = "profile"
    c: float = Field(..., gt=0, description="Soliton speed")


class SpectrumExperiment(ExperimentBase):
    kind: Literal["spectrum"] = "spectrum"
    c: float = Field(..., gt=0)
    m: int = Field(default=4, ge=2, le=10, description="Number of eigenpairs")
    kinetic: Literal["stencil", "spectral"] = Field(default="stencil")


class InitialSpec(BaseModel):
    """Initial datum for ``evolve``."""

    type: Literal["soliton", "chain", "file"] = "soliton"
    speeds: list[float] = Field(default_factory=lambda: [1.0])
    positions: list[float] = Field(default_factory=lambda: [0.0])
    path: Optional[str] = Field(default=None, description="CSV with columns x, eta, v")
    alpha: float = Field(default=0.0, ge=0, description="X-norm of a smooth random perturbation")

    @model_validator(mode="after")
    def _consistent(self) -> "InitialSpec":
        if self.type == "file" and not self.path:
            raise ValueError("file initial data needs a path")
        if len(self.speeds) != len(self.positions):
            raise ValueError("speeds and positions must have the same length")
        if self.type == "soliton" and len(self.speeds) != 1:
            raise ValueError("a soliton takes exactly one speed")
        return self


class EvolveExperiment(ExperimentBase):
    kind: Literal["evolve"] = "evolve"
    initial: InitialSpec = Field(default_factory=InitialSpec)
    evolution: EvolutionConfig
    dispersion_mode: Optional[int] = Field(
        default=None, ge=1, description="Also measure the small-wave frequency of this Fourier mode"
    )


class ChainStabilityExperiment(ExperimentBase):
    kind: Literal["chain-stability"] = "chain-stability"
    speeds: list[float] = Field(..., min_length=1)
    gap: float = Field(..., gt=0, description="Initial separation L0 between neighbours")
    alpha0: Union[float, list[float]] = Field(default=1e-3, description="Perturbation size or sweep")
    t_end: float = Field(..., gt=0)
    snapshot_dt: float = Field(default=1.0, gt=0, description="Time between tracked snapshots")
    cfl_lambda: Optional[float] = Field(default=None, gt=0, le=0.25)
    dealias: bool = False
    tau: Optional[float] = Field(default=None, gt=0, description="Rate of Phi cutoffs")
    tau0: Optional[float] = Field(default=None, gt=0, description="Rate of chi cutoffs")

    @field_validator("speeds")
    @classmethod
    def _ordered(cls, values: list[float]) -> list[float]:
        return _strictly_increasing(values)

    @property
    def alphas(self) -> list[float]:
        return list(self.alpha0) if isinstance(self.alpha0, list) else [self.alpha0]


class VerifyAppendixExperiment(ExperimentBase):
    kind: Literal["verify-appendix"] = "verify-appendix"
    crossterm_draws: int = Field(default=10_000, ge=1)
    speeds: list[float] = Field(default_factory=lambda: [1.2, 1.3])
    near_sonic_speeds: list[float] = Field(default_factory=lambda: [1.36, 1.38])
    separations: list[float] = Field(default_factory=lambda: [40.0, 60.0, 80.0])
    p: float = Field(default=2.0, ge=1)
    lipschitz_draws: int = Field(default=50, ge=1)
    virial_draws: int = Field(default=10, ge=1, description="Random fields and cutoffs for the virial identity")

    @field_validator("speeds", "near_sonic_speeds")
    @classmethod
    def _ordered(cls, values: list[float]) -> list[float]:
        return _strictly_increasing(values)


ExperimentConfig = Annotated[
    Union[
        ProfileExperiment,
        SpectrumExperiment,
        EvolveExperiment,
        ChainStabilityExperiment,
        VerifyAppendixExperiment,
    ],
    Field(discriminator="kind"),
]

_adapter: TypeAdapter[Any] = TypeAdapter(ExperimentConfig)


def parse_config(data: dict[str, Any]) -> ExperimentBase:
    """Validate a manifest dictionary."""
    try:
        return _adapter.validate_python(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], location=".".join(str(p) for p in first["loc"])) from exc
