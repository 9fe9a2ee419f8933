"""Artifact writers: CSV tables through pandas and JSON reports."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import pandas as pd
from pydantic import BaseModel

from darksol.config.settings import get_settings
from darksol.core.exceptions import ConfigError
from darksol.core.field_ops import FieldPair, Grid
from darksol.experiments.schemas import ExperimentBase, parse_config
from darksol.utils.monitoring import get_logger

logger = get_logger(__name__)


def load_config(path: str | Path) -> ExperimentBase:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError("config file not found", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config file is not valid JSON", path=str(path), error=str(exc)) from exc
    return parse_config(data)


def ensure_output_dir(directory: str | Path) -> Path:
    """The directory must exist and be writable; nothing is created."""
    path = Path(directory)
    if not path.is_dir():
        raise ConfigError("output directory does not exist", directory=str(path))
    if not os.access(path, os.W_OK):
        raise ConfigError("output directory is not writable", directory=str(path))
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=get_settings().output.float_format)
    logger.debug("csv written", path=str(path), rows=len(frame))
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def write_json(report: Mapping[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n")
    logger.debug("report written", path=str(path))
    return path


def field_frame(field: FieldPair) -> pd.DataFrame:
    return pd.DataFrame({"x": field.grid.x, "eta": field.eta, "v": field.v})


def read_field(path: str | Path, grid: Grid) -> FieldPair:
    """Read a field from a CSV with columns x, eta, v sampled on ``grid``."""
    frame = pd.read_csv(path)
    missing = {"eta", "v"} - set(frame.columns)
    if missing:
        raise ConfigError("initial data file lacks columns", missing=sorted(missing))
    if len(frame) != grid.n:
        raise ConfigError("initial data does not match the grid", rows=len(frame), n=grid.n)
    return FieldPair(frame["eta"].to_numpy(float), frame["v"].to_numpy(float), grid)
