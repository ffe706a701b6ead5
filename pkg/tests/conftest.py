import math

import pytest

from kgsim.config import config
from kgsim.ground_state import build_family
from kgsim.spectral_grid import Grid

OMEGA_C3 = math.sqrt(0.5)


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.setattr(config, "VERBOSE", False)


@pytest.fixture(scope="session")
def grid():
    return Grid(80.0, 512)


@pytest.fixture(scope="session")
def wave(grid):
    """Cubic standing wave at the critical frequency."""
    return build_family(3.0, OMEGA_C3, grid)


@pytest.fixture(scope="session")
def wide_grid():
    """Room for the R = 20 virial cutoff (2R < L/2)."""
    return Grid(100.0, 1024)


@pytest.fixture(scope="session")
def wide_wave(wide_grid):
    return build_family(3.0, OMEGA_C3, wide_grid)
