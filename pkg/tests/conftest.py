from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lowmach_mhd.grid import DimMode, Grid

settings.register_profile("suite", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("suite")


@pytest.fixture(params=[DimMode.SLAB, DimMode.FULL3D], ids=["slab", "full3d"])
def grid(request) -> Grid:
    return Grid(16, request.param)


@pytest.fixture
def slab32() -> Grid:
    return Grid(32, DimMode.SLAB)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_lines(request) -> list:
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
