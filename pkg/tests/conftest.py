import numpy as np
import pytest

from predmeta import StudySet


@pytest.fixture
def three():
    """y=[0,1,2], unit variances: Q=2, tau2 estimates all zero."""
    return StudySet([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])


@pytest.fixture
def two():
    """y=[0,2], unit variances: Q=2, tau2_DL = tau2_REML = 1."""
    return StudySet([0.0, 2.0], [1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
        if not any(line.startswith("[ACCEPTANCE] 8 ") for line in LINES):
            terminalreporter.write_line(
                "[ACCEPTANCE] 8 SKIP  datasets not supplied "
                "(set PREDMETA_REFERENCE_DIR)")
