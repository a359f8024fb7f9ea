import numpy as np
import pytest

from subsonic_nozzle.gas import GasModel
from subsonic_nozzle.geometry import NozzleGeometry

# (criterion, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture
def gas2():
    """gamma = 2, A = 1/2: h = rho, critical density 2s/3, Sigma(1.5) = 1."""
    return GasModel.polytropic(2.0, 0.5)


@pytest.fixture
def flat():
    return NozzleGeometry.flat(1.0)


@pytest.fixture
def constricted():
    return NozzleGeometry.from_coefficients(1.0, {"mean": 0.0}, {"mean": 1.0, "sin": [-0.1]})


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
