"""Shared fixtures for the dark-soliton lab tests."""

import numpy as np
import pytest

from darksol.config.settings import reload_settings
from darksol.core.field_ops import FieldPair, Grid
from darksol.core.nonlinearity import Nonlinearity, gross_pitaevskii, polynomial


@pytest.fixture(autouse=True)
def fresh_settings():
    """Settings are rebuilt from the environment around every test."""
    reload_settings()
    yield
    reload_settings()


@pytest.fixture
def gp() -> Nonlinearity:
    return gross_pitaevskii()


@pytest.fixture
def quartic() -> Nonlinearity:
    """f(rho) = (1 - rho) + (1 - rho)^3 / 2: satisfies (H1)-(H3) with c_s^2 = 2."""
    return polynomial((1.0, 0.0, 0.5))


@pytest.fixture
def small_grid() -> Grid:
    return Grid(256, 40.0)


@pytest.fixture
def medium_grid() -> Grid:
    return Grid(512, 64.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def gaussian_pair(grid: Grid, center: float = 0.0, width: float = 3.0, scale: float = 0.05):
    """A smooth, well-resolved perturbation supported near ``center``."""
    z = (grid.x - center) / width
    bump = np.exp(-z * z)
    return FieldPair(scale * bump * np.cos(1.3 * z), -0.7 * scale * bump * z, grid)
