from __future__ import annotations

import numpy as np
import pytest

from qsfqueue.model import BatchService, CoxianArrival, QueueModel

ACCEPTANCE_LINES: dict[str, str] = {}


def record_acceptance(key: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  {key}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


TABLE_SERVICE = BatchService(0.8, (0.25, 0.5, 0.25))


@pytest.fixture
def table_service():
    return TABLE_SERVICE


@pytest.fixture
def table_model():
    """Table 1 configuration with q = 0.5, k = 5."""
    return QueueModel(CoxianArrival.homogeneous(5, 0.5, 0.5), TABLE_SERVICE)


@pytest.fixture
def mm1():
    return QueueModel(CoxianArrival.exponential(0.5), BatchService.single(0.8))


def random_model(rng: np.random.Generator, max_k: int = 6, max_b: int = 3) -> QueueModel:
    """Random ergodic finite-order model with load between 0.2 and 0.9."""
    k = int(rng.integers(1, max_k + 1))
    lams = rng.uniform(0.2, 2.0, size=k)
    qs = list(rng.uniform(0.05, 1.0, size=k - 1)) + [0.0]
    b = int(rng.integers(1, max_b + 1))
    pmf = rng.dirichlet(np.ones(b))
    pmf = tuple(pmf / pmf.sum())
    arrival = CoxianArrival(tuple(lams), tuple(qs))
    rate = 1.0 / float(np.sum(arrival.reach_probabilities() / arrival.rates))
    mean_batch = sum(j * p for j, p in enumerate(pmf, start=1))
    mu = rate / (mean_batch * rng.uniform(0.2, 0.9))
    return QueueModel(arrival, BatchService(mu, pmf))
