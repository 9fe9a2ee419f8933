import json

import pytest
from typer.testing import CliRunner

from cli.commands.experiments import parse_grid, parse_nonlinearity, resolve
from cli.main import app
from darksol.core.exceptions import ConfigError

runner = CliRunner()


def test_parse_grid_and_nonlinearity():
    assert parse_grid("4096,200") == {"n": 4096, "length": 200.0}
    with pytest.raises(ConfigError):
        parse_grid("4096")
    assert parse_nonlinearity('{"kind": "poly_1mr", "coeffs": [1, 0, 0.5]}')["coeffs"] == [1, 0, 0.5]
    with pytest.raises(ConfigError):
        parse_nonlinearity("[1, 2]")


def test_manifest_kind_must_match_command(tmp_path):
    path = tmp_path / "profile.json"
    path.write_text(json.dumps({
        "kind": "profile", "c": 1.0, "grid": {"n": 1024, "length": 80.0},
        "output": {"directory": str(tmp_path)},
    }))
    with pytest.raises(ConfigError, match="does not match"):
        resolve("spectrum", path, "", "", tmp_path, None, {})


def test_profile_command_writes_artifacts(tmp_path):
    result = runner.invoke(app, ["profile", "--c", "1.0", "--grid", "1024,80", "--out", str(tmp_path)])

    assert result.exit_code == 0, result.output
    assert (tmp_path / "profile.profile.csv").exists()
    assert (tmp_path / "profile.profile.json").exists()
    assert "PASS" in result.output


def test_missing_output_directory_exits_with_config_code(tmp_path):
    result = runner.invoke(app, ["profile", "--c", "1.0", "--grid", "1024,80", "--out", str(tmp_path / "absent")])
    assert result.exit_code == 2
    assert "ConfigError" in result.output


def test_no_soliton_outside_admissible_speeds(tmp_path):
    result = runner.invoke(app, ["profile", "--c", "1.5", "--grid", "1024,80", "--out", str(tmp_path)])
    assert result.exit_code == 3
    assert "NoZero" in result.output


def test_reversed_speeds_manifest_exits_with_config_code(tmp_path):
    manifest = tmp_path / "chain.json"
    manifest.write_text(json.dumps({
        "kind": "chain-stability",
        "speeds": [1.3, 1.2],
        "gap": 60.0,
        "t_end": 10.0,
        "grid": {"n": 4096, "length": 400.0},
        "output": {"directory": str(tmp_path)},
    }))
    result = runner.invoke(app, ["run", str(manifest)])
    assert result.exit_code == 2
    assert not list(tmp_path.glob("*.csv"))


def test_spectrum_command_with_spectral_kinetic_term(tmp_path):
    result = runner.invoke(app, [
        "spectrum", "--kinetic", "spectral", "--grid", "256,40", "--out", str(tmp_path), "--prefix", "gp",
    ])
    assert result.exit_code in (0, 1), result.output
    assert (tmp_path / "gp.spectrum.csv").exists()
    assert "single_negative_direction" in result.output


def test_run_sweep_of_manifests(tmp_path):
    paths = []
    for index, c in enumerate((1.0, 1.2)):
        path = tmp_path / f"m{index}.json"
        path.write_text(json.dumps({
            "kind": "profile", "c": c, "grid": {"n": 1024, "length": 80.0},
            "output": {"directory": str(tmp_path), "prefix": f"p{index}"},
        }))
        paths.append(str(path))

    result = runner.invoke(app, ["run", *paths, "--sweep", "--threads", "2"])

    assert result.exit_code == 0, result.output
    assert (tmp_path / "p0.profile.csv").exists()
    assert (tmp_path / "p1.profile.csv").exists()
    assert "Sweep" in result.output
