import sys
from pathlib import Path

# make the oracle module importable from every test file
sys.path.insert(0, str(Path(__file__).parent))


import pytest

# one summary line per acceptance check, with PASS/FAIL taken from the test outcome
_CRITERIA: list[tuple[str, str]] = []


@pytest.fixture
def criterion(request):
    """Call with a description of what was measured before asserting."""
    def record(text: str):
        request.node.user_properties.append(("criterion", text))
    return record


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for name, text in report.user_properties:
        if name == "criterion":
            _CRITERIA.append(("PASS" if report.passed else "FAIL", text))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, text in _CRITERIA:
        terminalreporter.write_line(f"{status} criterion {text}")
