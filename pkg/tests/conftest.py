import json
from pathlib import Path

import numpy as np
import pytest

from nls2.grid import SystemState, make_grid
from nls2.groundstate import REFERENCE_GRID, solve_ground_state

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def scalar_amplitude():
    return json.loads((FIXTURES / "scalar_amplitude.json").read_text())["scalar_amplitude"]


@pytest.fixture(scope="session")
def gs1():
    return solve_ground_state(1.0)


@pytest.fixture(scope="session")
def ref_grid():
    return make_grid(*REFERENCE_GRID)


@pytest.fixture(scope="session")
def grid64():
    return make_grid(64, 16.0)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32, 16.0)


def gaussian_pair(grid, amp=1.0, width=1.0, beta=1.0, xi=(0.0, 0.0, 0.0), v_scale=1.0):
    """Centred Gaussian pair, optionally carrying a plane-wave phase."""
    X, Y, Z = grid.offsets()
    env = amp * np.exp(-(X**2 + Y**2 + Z**2) / (2 * width**2))
    phase = np.exp(1j * (xi[0] * X + xi[1] * Y + xi[2] * Z))
    u = env * phase
    return SystemState(u, v_scale * u, grid, 0.0, beta)


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    """Store one acceptance line; printed together at the end of the session."""
    ACCEPTANCE_LINES.append((number, f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title}: {detail}"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
