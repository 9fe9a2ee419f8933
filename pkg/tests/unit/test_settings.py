import pytest
from pydantic import ValidationError

from darksol.config.settings import Settings, get_settings, reload_settings
from darksol.utils.monitoring import get_logger, metrics, setup_logging

pytestmark = pytest.mark.unit


def test_defaults():
    settings = get_settings()
    assert settings.solver.cfl_lambda == 0.2
    assert settings.solver.newton_tol == 1e-12
    assert settings.solver.vacuum_margin == 1e-6
    assert settings.output.float_format == "%.17g"
    assert settings.logging.level == "INFO"


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("DARKSOL_SOLVER__NEWTON_MAX_ITER", "80")
    monkeypatch.setenv("DARKSOL_LOGGING__FORMAT", "json")
    monkeypatch.setenv("DARKSOL_THREADS", "1000")
    settings = reload_settings()
    assert settings is get_settings()
    assert settings.solver.newton_max_iter == 80
    assert settings.logging.format == "json"
    assert settings.threads == 256


def test_invalid_values_are_rejected(monkeypatch):
    monkeypatch.setenv("DARKSOL_SOLVER__CFL_LAMBDA", "0.3")
    with pytest.raises(ValidationError):
        Settings()


def test_metrics_snapshot_counts_checks():
    key = "darksol_checks_total{check=unit_check,verdict=pass}"
    before = metrics.snapshot().get(key, 0.0)
    metrics.record_check("unit_check", True)
    metrics.record_check("unit_check", True)
    assert metrics.snapshot()[key] == before + 2.0


def test_logging_setup_is_idempotent():
    setup_logging("DEBUG", "console")
    setup_logging("DEBUG", "console")
    get_logger("tests").info("logger ready", ready=True)


def test_pytest_configuration_enforces_coverage_floor():
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    from pathlib import Path

    config = tomllib.loads((Path(__file__).parents[2] / "pyproject.toml").read_text())
    addopts = config["tool"]["pytest"]["ini_options"]["addopts"]
    assert "--cov-fail-under=80" in addopts
    assert "--cov=darksol" in addopts
