import sys
import math

import numpy as np
import pytest

COUNTEREXAMPLE = np.array([[1.0, 1.0], [1.0, 1.0]]) / math.sqrt(2.0)
EQUAL_MAGNITUDE = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])  # ker = span([1, 1, -1])
ROW_12 = np.array([[1.0, 2.0]])  # ker = span([2, -1])
# ker = span([3, 1, 1, 1])
D1_3111 = np.array([[1.0, -3.0, 0.0, 0.0], [1.0, 0.0, -3.0, 0.0], [1.0, 0.0, 0.0, -3.0]])


@pytest.fixture
def counterexample():
    return COUNTEREXAMPLE.copy()


@pytest.fixture
def equal_magnitude():
    return EQUAL_MAGNITUDE.copy()


@pytest.fixture
def row12():
    return ROW_12.copy()


@pytest.fixture
def d1_3111():
    return D1_3111.copy()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
