import numpy as np
import pytest

from quadrimer.lattice import LatticeParams
from quadrimer.stationary import Side, continue_family

# acceptance lines collected by tests/test_acceptance.py, echoed in the summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def odd_pt():
    """kappa = 0.1, kappa' = 1, delta = 1.5: unbroken odd-PT chain, 20 cells."""
    return LatticeParams(1.5, 0.1, 1.0)


@pytest.fixture(scope="session")
def partially_broken():
    return LatticeParams(1.0, 0.1, 1.0)


@pytest.fixture(scope="session")
def h_chain():
    return LatticeParams(0.0, 0.1j, 1.0j)


@pytest.fixture(scope="session")
def odd_pt_families(odd_pt):
    """Both seed labels on both edges, continued to the window ends."""
    return {
        ("left", 0.0): continue_family(odd_pt, Side.LEFT, 0.0, -1.0),
        ("left", np.pi / 4): continue_family(odd_pt, Side.LEFT, np.pi / 4, -1.0),
        ("right", 0.0): continue_family(odd_pt, Side.RIGHT, 0.0, 3.0),
        ("right", np.pi / 4): continue_family(odd_pt, Side.RIGHT, np.pi / 4, 3.0),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
