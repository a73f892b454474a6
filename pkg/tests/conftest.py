import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _ACCEPTANCE[name] = (outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (outcome, duration) in sorted(_ACCEPTANCE.items(), key=lambda kv: _order(kv[0])):
        terminalreporter.write_line(f"{outcome:4}  {name}  ({duration:.2f} s)")


def _order(name):
    parts = name.split("_")
    return int(parts[2]) if len(parts) > 2 and parts[2].isdigit() else 99
