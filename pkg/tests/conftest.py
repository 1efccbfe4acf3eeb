import numpy as np
import pytest

from calabiflow import KahlerPotential, PeriodicGrid
from calabiflow.geometry import cos_potential, random_potential


@pytest.fixture(scope="session")
def grid():
    return PeriodicGrid(1024)


@pytest.fixture(scope="session")
def small_grid():
    return PeriodicGrid(256)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def zero(grid):
    return KahlerPotential.constant(grid)


@pytest.fixture(scope="session")
def u_half(grid):
    return cos_potential(grid, 0.5)


@pytest.fixture(scope="session")
def u_tenth(grid):
    return cos_potential(grid, 0.1)


def random_pair(grid, rng, shift=0.0):
    a = random_potential(grid, rng)
    b = random_potential(grid, rng, shift=shift * rng.normal())
    return a, b


# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.failed and number not in ACCEPTANCE:
        message = str(report.longrepr).strip().splitlines()[-1]
        ACCEPTANCE[number] = f"FAIL criterion {number:2d}: {message}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
