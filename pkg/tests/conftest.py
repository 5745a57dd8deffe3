import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from gwbcm.network import Network, validate_network  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_network(rng, n, symmetric=True, masses="random"):
    W = rng.random((n, n))
    if symmetric:
        W = W + W.T
        np.fill_diagonal(W, 0.0)
    if masses == "uniform":
        m = np.full(n, 1.0 / n)
    else:
        m = rng.random(n) + 0.2
        m /= m.sum()
    return validate_network(W, m)


def cloud_network(rng, n, dim=2):
    from scipy.spatial.distance import pdist, squareform

    return Network.uniform(squareform(pdist(rng.random((n, dim)))))


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_LINES.append(f"{status}  {name}  ({report.duration:.1f} s)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
