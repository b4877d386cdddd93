import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

# (criterion, passed, seconds, detail) rows filled by test_acceptance
ACCEPTANCE = []


@pytest.fixture(scope="session")
def oracles():
    return json.loads((DATA / "oracles.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, passed, secs, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(
            f"criterion {num}: {'PASS' if passed else 'FAIL'} ({secs:.1f} s) {detail}")
