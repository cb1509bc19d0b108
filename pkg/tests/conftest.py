import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vectokens import Dataset, InvertedIndex
from vectokens.synth import clustered_vectors, random_unit_vectors

settings.register_profile(
    "repro",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repro")

W = [0.12, -0.13, 0.065]

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def random_1k():
    return Dataset.from_rows(random_unit_vectors(50, 1000, seed=7))


@pytest.fixture(scope="session")
def clustered_small():
    return Dataset.from_rows(clustered_vectors(64, 1000, 20, 0.3, seed=3))


@pytest.fixture(scope="session")
def clustered_small_index(clustered_small):
    return InvertedIndex.build(clustered_small)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
