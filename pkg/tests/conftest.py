import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = []


@pytest.fixture
def criterion(capsys):
    """``record(number, title, ok, detail)`` prints one pass/fail line and keeps it for the summary."""

    def record(number, title, ok, detail):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        _CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
