import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SESSION_START = time.perf_counter()
_CRITERIA = {}


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so the reproducibility criterion can time the whole session
    items.sort(key=lambda it: it.nodeid.startswith("tests/test_acceptance.py"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        ok, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def criterion():
    """Record and print the verdict for one acceptance criterion."""
    def record(num, ok, detail):
        _CRITERIA[num] = (bool(ok), detail)
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


@pytest.fixture(scope="session")
def session_start():
    return SESSION_START
