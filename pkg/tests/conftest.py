import numpy as np
import pytest

from bgforms.curvature import TrigExpression
from bgforms.fields import TorusGrid


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture(scope="session")
def grid4():
    return TorusGrid(4, (8, 8, 8, 8))


@pytest.fixture(scope="session")
def phi4():
    return TrigExpression.from_list([
        {"amplitude": 0.1, "mode": [1, 0, 0, 0], "phase": "sin"},
        {"amplitude": 0.05, "mode": [0, 1, 0, 0], "phase": "cos"},
    ])


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(LINES):
            terminalreporter.write_line(LINES[number])
