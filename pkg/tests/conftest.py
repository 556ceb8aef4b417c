import numpy as np
import pytest

from dmplqr.pipeline import benchmark_study
from dmplqr.systems import random_controllable_system


@pytest.fixture(scope="session")
def study():
    """Benchmark study at the pinned seed and default configuration."""
    return benchmark_study()


@pytest.fixture
def small_system():
    return random_controllable_system(3, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


#: (criterion number, passed, detail) recorded by the acceptance tests
ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""
    def record(number, passed, detail):
        ACCEPTANCE_RESULTS.append((number, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_runtest_logreport(report):
    # a criterion that raised before recording still gets a FAIL line
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when != "call" or not report.failed or "test_acceptance" not in report.nodeid:
        return
    number = int(name.split("_")[1])
    if not any(n == number for n, _, _ in ACCEPTANCE_RESULTS):
        ACCEPTANCE_RESULTS.append((number, False, f"raised: {report.longrepr.reprcrash.message}"))
