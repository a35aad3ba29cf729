import re

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=150, deadline=None)
settings.load_profile("default")

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")
_outcomes: dict[int, list[bool]] = {}
_reports: list[str] = []


@pytest.fixture
def acceptance_report():
    """Append lines that should appear in the terminal summary."""
    return _reports.append


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes.setdefault(int(m.group(1)), []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        tr.write_line(f"criterion {n:2d}: {'PASS' if all(_outcomes[n]) else 'FAIL'}")
    if _reports:
        tr.section("acceptance reports")
        for line in _reports:
            tr.write_line(line)
