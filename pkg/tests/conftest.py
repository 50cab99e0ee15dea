import numpy as np
import pytest

from qcgoal.estimator import QuantityOfInterest
from qcgoal.model import ModelParams, Partition

BASELINE = ModelParams(M=500, a0=1.0, k0=1.0, k1=2.0, k2=2.0)


def random_params(rng, M):
    k2 = rng.uniform(-1.0, 2.0)
    k1 = max(0.0, -4.0 * k2) + rng.uniform(0.05, 3.0)
    return ModelParams(M=M, a0=rng.uniform(0.5, 2.0), k0=rng.uniform(0.1, 3.0), k1=k1, k2=k2)


def random_instance(rng, M=None):
    """Random parameters, partition and goal functional on a small chain."""
    M = int(rng.choice([8, 16])) if M is None else M
    params = random_params(rng, M)
    partition = Partition(rng.random(2 * M) < rng.uniform(0.0, 1.0))
    if rng.random() < 0.5:
        lo = int(rng.integers(-M + 1, M))
        hi = int(rng.integers(lo, M + 1))
        q = QuantityOfInterest.indicator(M, lo, hi)
    else:
        q = QuantityOfInterest(rng.normal(size=2 * M))
    return params, partition, q


def random_instances(n, seed=0):
    rng = np.random.default_rng(seed)
    return [random_instance(rng) for _ in range(n)]


@pytest.fixture(scope="session")
def baseline_params():
    return BASELINE


@pytest.fixture(scope="session")
def baseline_q():
    return QuantityOfInterest.indicator(500, 11, 30)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance verdicts, echoed again at the end of the run so they survive output capture.
ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
