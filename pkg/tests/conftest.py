import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hypma.coeffs import CoefficientSet
from hypma.initdata import YGrid, from_zp

settings.register_profile("default", deadline=None, max_examples=150,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CONSTANT = ("1/16", "1/2", "0", "0")
HESS_MINUS_ONE = ("1", "0", "0", "0")


@pytest.fixture(scope="session")
def constant_cs():
    return CoefficientSet(*CONSTANT)


@pytest.fixture(scope="session")
def hess_cs():
    return CoefficientSet(*HESS_MINUS_ONE)


@pytest.fixture(scope="session")
def constant_axis(constant_cs):
    return from_zp(constant_cs, "1", "1", YGrid(-1, 1, 1 / 128))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance lines collected during the run."""
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(LINES, key=lambda k: (int(k.split(".")[0]), k)):
            terminalreporter.write_line(LINES[key])
