import sys

import numpy as np
import pytest

from flowsculpt import GridSpec, make_inlet, surrogate_library


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Re-emit the acceptance criterion verdict lines after the test run."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULT_LINES", None) if mod else None
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid():
    return GridSpec(12, 32)


@pytest.fixture(scope="session")
def library(grid):
    return surrogate_library(grid)


@pytest.fixture(scope="session")
def inlet(grid):
    return make_inlet(grid)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(6, 8)


@pytest.fixture(scope="session")
def small_library(small_grid):
    return surrogate_library(small_grid, actions=8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
