"""Shared fixtures; expensive runs are computed once per session."""
import numpy as np
import pytest

from wavelsq.grid import StateSlice, build_setup
from wavelsq.lsq import SolverConfig, solve
from wavelsq.nonlinearity import sine

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_setup():
    """Reference scale: nx=63, T=2.5, omega=(0.2, 0.8)."""
    return build_setup(63, 2.5, (0.2, 0.8))


@pytest.fixture(scope="session")
def small_setup():
    return build_setup(15, 2.5, (0.2, 0.8))


@pytest.fixture(scope="session")
def sine1(ref_setup):
    return StateSlice(np.sin(np.pi * ref_setup.x), np.zeros(ref_setup.nx))


@pytest.fixture(scope="session")
def rest(ref_setup):
    return StateSlice.zeros(ref_setup.nx)


@pytest.fixture(scope="session")
def sine5_run(ref_setup, sine1, rest):
    """SINE(5), (sin pi x, 0) -> (0, 0) with tol_E = 1e-16."""
    cfg = SolverConfig(tol_E=1e-16)
    return solve(ref_setup, sine(5.0), sine1, rest, cfg), cfg
