import numpy as np
import pytest

from jostkit.expansion import SpectralPair, expansion_resonances, survival_series
from jostkit.model import PhysConsts, PiecewiseConstantPotential, make_test_function
from jostkit.numerics import Region
from jostkit.resonance import find_resonances

DEFAULT_REGION = Region(0.05, 6.0, -1.5, -1e-8)

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def consts():
    return PhysConsts()


@pytest.fixture(scope="session")
def shell():
    return PiecewiseConstantPotential.shell()


@pytest.fixture(scope="session")
def free():
    return PiecewiseConstantPotential.free()


@pytest.fixture(scope="session")
def barrier():
    return PiecewiseConstantPotential.barrier(0.0, 1.0, 5.0)


@pytest.fixture(scope="session")
def tfs(shell):
    return [make_test_function(1, 0.5, 0.085, shell), make_test_function(2, 0.45, 0.08, shell)]


@pytest.fixture(scope="session")
def poles(shell, consts):
    return find_resonances(DEFAULT_REGION, shell, consts)


@pytest.fixture(scope="session")
def expansion_poles(shell, consts):
    return expansion_resonances(shell, consts)


@pytest.fixture(scope="session")
def line_tfs(barrier):
    return [make_test_function(0, 0.5, 0.085, barrier), make_test_function(1, 0.5, 0.085, barrier, origin=0.5)]


@pytest.fixture(scope="session")
def flagship_pair(tfs, shell, consts):
    return SpectralPair(tfs[0], tfs[1], shell, consts)


@pytest.fixture(scope="session")
def decay(tfs, shell, consts, expansion_poles):
    times = np.linspace(0.0, 600.0, 301)
    return survival_series(tfs[0], times, shell, consts, expansion_poles)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
