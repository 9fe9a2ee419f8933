"""Builders turning command-line flags into experiment manifests."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from darksol.core.exceptions import ConfigError
from darksol.experiments.io import load_config
from darksol.experiments.schemas import ExperimentBase, parse_config


def parse_grid(text: str) -> dict[str, Any]:
    """``"4096,200"`` -> ``{"n": 4096, "length": 200.0}``."""
    try:
        n, length = text.split(",")
        return {"n": int(n), "length": float(length)}
    except ValueError as exc:
        raise ConfigError("grid must be given as 'n,length'", grid=text) from exc


def parse_nonlinearity(text: str) -> dict[str, Any]:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("nonlinearity must be a JSON object", nl=text) from exc
    if not isinstance(value, dict):
        raise ConfigError("nonlinearity must be a JSON object", nl=text)
    return value


def resolve(
    kind: str,
    config: Optional[Path],
    nl: str,
    grid: str,
    out: Path,
    prefix: Optional[str],
    extra: dict[str, Any],
) -> ExperimentBase:
    """A manifest file wins over flags; its kind must match the subcommand."""
    if config is not None:
        manifest = load_config(config)
        if getattr(manifest, "kind") != kind:
            raise ConfigError("manifest kind does not match the command", expected=kind,
                              found=getattr(manifest, "kind"))
        return manifest
    data: dict[str, Any] = {
        "kind": kind,
        "nonlinearity": parse_nonlinearity(nl),
        "grid": parse_grid(grid),
        "output": {"directory": str(out), "prefix": prefix or kind.replace("-", "_")},
    }
    data.update({key: value for key, value in extra.items() if value is not None})
    return parse_config(data)
