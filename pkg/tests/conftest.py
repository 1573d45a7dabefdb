import numpy as np
import pytest

from fermi_slab.analysis import sweep_m
from fermi_slab.grid import GridSpec, PhysicalParams, free_gas_density, trench_defect

EPS_F = 2.0
W = 4.0
SWEEP_MS = (16.0, 4.0, 2.0, 1.0, 0.5)

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def default_grid():
    return GridSpec(60.0, 2001)


@pytest.fixture(scope="session")
def trench(default_grid):
    return trench_defect(default_grid, free_gas_density(EPS_F), W)


@pytest.fixture(scope="session")
def trench_sweep(trench):
    """Converged trench states at m = 16, 4, 2, 1, 0.5 on the default grid."""
    report = sweep_m(trench, PhysicalParams(EPS_F, SWEEP_MS[0]), SWEEP_MS)
    return {e.m: e for e in report.entries}, report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
