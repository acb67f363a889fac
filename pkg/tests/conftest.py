import numpy as np
import pytest

from tlmor.models import generate_random_stable
from tlmor.sysmodel import StateSpace, TimeInterval


def pytest_runtest_makereport(item, call):
    """
    incremental tests implementation
    """
    if call.excinfo is not None and "incremental" in item.keywords:
        parent = item.parent
        parent._previousfailed = item


def pytest_runtest_setup(item):
    """
    Use incremental
    """

    if "incremental" in item.keywords:
        previousfailed = getattr(item.parent, "_previousfailed", None)
        if previousfailed is not None:
            pytest.xfail("previous test failed (%s)" % previousfailed.name)


@pytest.fixture(scope="session")
def scalar_sys():
    """H(s) = 1 / (s + 1)."""
    return StateSpace(A=[[-1.0]], B=[[1.0]], C=[[1.0]])


@pytest.fixture(scope="session")
def diag_sys():
    """H(s) = 1 / (s + 1) + 1 / (s + 2)."""
    return StateSpace(A=np.diag([-1.0, -2.0]), B=[[1.0], [1.0]], C=[[1.0, 1.0]])


@pytest.fixture(scope="session")
def unit_interval():
    return TimeInterval.until(t=1.0)


@pytest.fixture(scope="session")
def random_sys():
    def _random_sys(n=10, m=1, p=1, seed=0):
        return generate_random_stable(n=n, m=m, p=p, seed=seed)

    return _random_sys
