import os

import pytest
from hypothesis import HealthCheck, settings

from pebblelab.builders import build_strassen

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def h2():
    return build_strassen(2)[0]


@pytest.fixture(scope="session")
def h4():
    return build_strassen(4)


@pytest.fixture(scope="session")
def h8():
    return build_strassen(8)


CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; shown in the terminal summary."""
    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}" + (f": {detail}" if detail else "")
        print(line)
        CRITERIA.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
