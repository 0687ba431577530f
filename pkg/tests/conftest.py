import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_REPORT: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one acceptance line per criterion; printed in the terminal summary."""
    def _record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _REPORT[number] = line
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_REPORT):
            terminalreporter.write_line(_REPORT[k])
