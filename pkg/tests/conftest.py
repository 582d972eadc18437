import numpy as np
import pytest

from wavetrap.geometry import Scene

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def standard():
    return Scene.standard()


@pytest.fixture(scope="session")
def wide():
    return Scene.wide()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
