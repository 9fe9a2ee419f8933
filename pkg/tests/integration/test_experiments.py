import json
import math

import pandas as pd
import pytest

from darksol.core.exceptions import ConfigError
from darksol.core.field_ops import Grid
from darksol.core.nonlinearity import gross_pitaevskii
from darksol.core.profile import build_profile
from darksol.experiments.io import field_frame, load_config, write_csv
from darksol.experiments.runners import RunOutcome, run, run_sweep
from darksol.experiments.schemas import (
    ChainStabilityExperiment,
    EvolveExperiment,
    ProfileExperiment,
    parse_config,
)

pytestmark = pytest.mark.integration


def _manifest(kind, directory, prefix="run", grid=(1024, 80.0), **extra):
    data = {
        "kind": kind,
        "nonlinearity": {"kind": "gp"},
        "grid": {"n": grid[0], "length": grid[1]},
        "output": {"directory": str(directory), "prefix": prefix},
    }
    data.update(extra)
    return data


def _verdicts(outcome: RunOutcome) -> dict[str, bool]:
    return {v.name: v.passed for v in outcome.verdicts}


def test_profile_run_writes_table_and_report(tmp_path):
    config = parse_config(_manifest("profile", tmp_path, c=1.0))
    assert isinstance(config, ProfileExperiment)

    outcome = run(config)

    assert outcome.exit_code == 0
    assert [p.name for p in outcome.artifacts] == ["run.profile.csv", "run.profile.json"]
    frame = pd.read_csv(tmp_path / "run.profile.csv")
    assert list(frame.columns) == ["x", "eta", "v", "deta", "dv"]
    assert len(frame) == 1024
    report = json.loads((tmp_path / "run.profile.json").read_text())
    assert report["xi_c"] == pytest.approx(0.5, abs=1e-10)
    assert report["nu_c"] == pytest.approx(1.0, abs=1e-10)
    assert report["p"] == pytest.approx(math.atan(1.0) - 0.5, abs=1e-9)
    assert report["dp_dc"] < 0.0
    assert not {"xi", "nu", "momentum", "momentum_derivative"} & set(report)
    assert report["first_integral_residual"] < 1e-10
    assert all(entry["passed"] for entry in report["hypotheses"]["entries"])
    assert {v["name"] for v in report["verdicts"]} == {"momentum_consistency", "decay_rate", "vacuum_bound", "first_integral"}


def test_profile_csv_is_byte_identical_across_runs(tmp_path):
    first = run(parse_config(_manifest("profile", tmp_path, prefix="a", c=1.1)))
    second = run(parse_config(_manifest("profile", tmp_path, prefix="b", c=1.1)))
    assert first.artifacts[0].read_bytes() == second.artifacts[0].read_bytes()


def test_missing_output_directory_is_a_config_error(tmp_path):
    config = parse_config(_manifest("profile", tmp_path / "absent", c=1.0))
    with pytest.raises(ConfigError) as info:
        run(config)
    assert info.value.exit_code == 2
    assert not (tmp_path / "absent").exists()


def test_reversed_speeds_are_rejected(tmp_path):
    data = _manifest("chain-stability", tmp_path, speeds=[1.3, 1.2], gap=40.0, t_end=1.0)
    with pytest.raises(ConfigError, match="strictly increasing"):
        parse_config(data)


def test_unknown_kind_and_bad_json(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_manifest("bogus", tmp_path))
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nowhere.json")


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "evolve.json"
    path.write_text(json.dumps(_manifest("evolve", tmp_path, evolution={"t_end": 0.5})))
    config = load_config(path)
    assert isinstance(config, EvolveExperiment)
    assert config.initial.type == "soliton"
    assert config.evolution.t_end == 0.5


def test_spectrum_run_finds_one_negative_direction(tmp_path):
    config = parse_config(_manifest("spectrum", tmp_path, grid=(256, 40.0), c=1.0, kinetic="spectral"))
    outcome = run(config)

    verdicts = _verdicts(outcome)
    assert verdicts["single_negative_direction"]
    assert verdicts["translation_kernel"]
    frame = pd.read_csv(tmp_path / "run.spectrum.csv")
    assert list(frame["index"]) == [0, 1, 2, 3]
    assert frame["eigenvalue"].iloc[0] < 0.0 < frame["eigenvalue"].iloc[2]


def test_evolve_run_conserves_energy_and_momentum(tmp_path):
    config = parse_config(_manifest(
        "evolve", tmp_path, grid=(256, 40.0),
        initial={"type": "soliton", "speeds": [1.0], "positions": [0.0]},
        evolution={"t_end": 0.5, "snapshot_every": 20},
    ))
    outcome = run(config)

    assert outcome.exit_code == 0
    series = pd.read_csv(tmp_path / "run.series.csv")
    assert list(series.columns) == ["t", "E", "p", "max_eta", "peak"]
    assert series["t"].iloc[0] == 0.0
    assert series["t"].iloc[-1] == pytest.approx(0.5)
    assert series["peak"].iloc[-1] == pytest.approx(0.5, abs=0.2)
    final = pd.read_csv(tmp_path / "run.final.csv")
    assert len(final) == 256


def test_evolve_writes_series_to_csv_path(tmp_path):
    target = tmp_path / "series_out.csv"
    data = _manifest(
        "evolve", tmp_path, grid=(256, 40.0), evolution={"t_end": 0.2, "snapshot_every": 10},
    )
    data["output"] = {"csv_path": str(target), "prefix": "cp"}
    config = parse_config(data)
    assert config.output.directory == str(tmp_path)

    outcome = run(config)

    assert outcome.exit_code == 0
    assert target in outcome.artifacts
    assert list(pd.read_csv(target).columns) == ["t", "E", "p", "max_eta", "peak"]
    assert not (tmp_path / "cp.series.csv").exists()
    assert (tmp_path / "cp.final.csv").exists()
    assert _verdicts(outcome)["endpoint_drift"]


def test_output_needs_a_location(tmp_path):
    data = _manifest("evolve", tmp_path, evolution={"t_end": 0.1})
    data["output"] = {"prefix": "nowhere"}
    with pytest.raises(ConfigError):
        parse_config(data)


def test_evolve_measures_small_wave_dispersion(tmp_path):
    config = parse_config(_manifest(
        "evolve", tmp_path, grid=(64, 20.0 * math.pi), evolution={"t_end": 0.1}, dispersion_mode=4,
    ))
    outcome = run(config)

    assert _verdicts(outcome)["dispersion"]
    report = json.loads((tmp_path / "run.evolve.json").read_text())
    assert report["dispersion"]["measured"] == pytest.approx(report["dispersion"]["predicted"], rel=1e-2)


def test_evolve_from_file_matches_soliton_start(tmp_path):
    grid = Grid(256, 40.0)
    profile = build_profile(gross_pitaevskii(), 1.0, grid)
    source = write_csv(field_frame(profile.field), tmp_path / "start.csv")

    evolution = {"t_end": 0.2, "snapshot_every": 10}
    from_file = run(parse_config(_manifest(
        "evolve", tmp_path, prefix="file", grid=(256, 40.0),
        initial={"type": "file", "path": str(source)}, evolution=evolution,
    )))
    direct = run(parse_config(_manifest("evolve", tmp_path, prefix="direct", grid=(256, 40.0), evolution=evolution)))

    a = pd.read_csv(tmp_path / "file.final.csv")
    b = pd.read_csv(tmp_path / "direct.final.csv")
    assert from_file.exit_code == direct.exit_code == 0
    assert (a["eta"] - b["eta"]).abs().max() < 1e-10


def test_file_initial_data_must_match_grid(tmp_path):
    profile = build_profile(gross_pitaevskii(), 1.0, Grid(128, 40.0))
    source = write_csv(field_frame(profile.field), tmp_path / "start.csv")
    config = parse_config(_manifest(
        "evolve", tmp_path, grid=(256, 40.0),
        initial={"type": "file", "path": str(source)}, evolution={"t_end": 0.1},
    ))
    with pytest.raises(ConfigError, match="does not match the grid"):
        run(config)


def test_evolve_manifest_validation(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_manifest("evolve", tmp_path, initial={"type": "file"}, evolution={"t_end": 1.0}))
    with pytest.raises(ConfigError):
        parse_config(_manifest("evolve", tmp_path, evolution={"t_end": 1.0, "cfl_lambda": 0.5}))
    with pytest.raises(ConfigError):
        parse_config(_manifest(
            "evolve", tmp_path, initial={"type": "soliton", "speeds": [1.0, 1.2], "positions": [0.0, 10.0]},
            evolution={"t_end": 1.0},
        ))


def test_verify_appendix_small_run(tmp_path):
    config = parse_config(_manifest(
        "verify-appendix", tmp_path, grid=(2048, 200.0),
        crossterm_draws=200, lipschitz_draws=5, seed=3,
    ))
    outcome = run(config)

    verdicts = _verdicts(outcome)
    assert verdicts["crossterm_bound"]
    assert verdicts["vacuum_margin"]
    assert verdicts["momentum_hessian"]
    assert verdicts["lipschitz"]
    assert verdicts["taylor_remainder"]
    assert verdicts["f_expansion"]
    assert verdicts["virial_identity"]
    assert verdicts["expansion_tail_decay"]
    assert verdicts["expansion_remainder"]
    assert verdicts["modulation_matrix"]
    assert {"polynomial[S^{2,2}]", "polynomial[D^2]"} <= set(verdicts)
    report = json.loads((tmp_path / "run.appendix.json").read_text())
    assert report["crossterm"] == {"passed": 200, "draws": 200}
    assert len(report["decay_fits"]) == 6
    assert report["virial"]["draws"] == 10
    assert report["decay_fits"][-1]["norms"][0] > 0.0
    assert report["config"]["nonlinearity"]["kind"] == "gp"


def test_sweep_keeps_going_past_a_failed_manifest(tmp_path):
    configs = [
        parse_config(_manifest("profile", tmp_path, prefix="one", c=1.0)),
        parse_config(_manifest("profile", tmp_path / "absent", c=1.0)),
        parse_config(_manifest("profile", tmp_path, prefix="two", c=1.2)),
    ]
    outcomes = run_sweep(configs, threads=2)

    assert [o.exit_code for o in outcomes] == [0, 2, 0]
    assert isinstance(outcomes[1].error, ConfigError)
    assert (tmp_path / "one.profile.csv").exists()
    assert (tmp_path / "two.profile.csv").exists()


@pytest.mark.slow
def test_chain_stability_small_sweep(tmp_path):
    config = parse_config(_manifest(
        "chain-stability", tmp_path, grid=(1024, 120.0),
        speeds=[1.0, 1.2], gap=30.0, alpha0=[1e-3, 2e-3], t_end=2.0, snapshot_dt=0.5,
    ))
    assert isinstance(config, ChainStabilityExperiment)
    outcome = run(config)

    verdicts = _verdicts(outcome)
    assert verdicts["tracking[0.001]"]
    assert verdicts["tracking[0.002]"]
    frame = pd.read_csv(tmp_path / "run.alpha0.001.csv")
    assert {"t", "c_1", "c_2", "a_1", "a_2", "eps_xnorm", "G", "p_tilde_1", "max_eta"} <= set(frame.columns)
    assert frame["a_2"].iloc[-1] - frame["a_1"].iloc[-1] > 30.0
    report = json.loads((tmp_path / "run.stability.json").read_text())
    assert len(report["runs"]) == 2
    assert report["scaling"][0]["alpha_large"] == pytest.approx(2e-3)
    assert report["scaling"][0]["alpha_small"] == pytest.approx(1e-3)
    assert verdicts["alpha_halving[0.002->0.001]"]
    assert 0.3 <= report["scaling"][0]["factor"] <= 0.8
