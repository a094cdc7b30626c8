import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile(
    "thorough", deadline=None, max_examples=500,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance outcomes, filled by tests/test_acceptance.py
CRITERIA: dict[str, tuple[str, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    def record(number: int | str, passed: bool | None, detail: str):
        status = {True: "PASS", False: "FAIL", None: "SKIPPED"}[passed]
        CRITERIA[str(number)] = (status, detail)
        print(f"CRITERION {number}: {status}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA, key=lambda k: (int(k.rstrip('abcdefgh')), k)):
        status, detail = CRITERIA[number]
        terminalreporter.write_line(f"CRITERION {number}: {status}  {detail}")
