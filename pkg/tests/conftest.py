import re

import pytest

_LINES = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the lines are echoed in the terminal summary."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])


def pytest_collection_modifyitems(items):
    # acceptance lines read best in criterion order
    def key(item):
        m = re.search(r"criterion_(\d+)", item.name)
        return int(m.group(1)) if m else 0

    items.sort(key=lambda it: (it.fspath.basename != "test_acceptance.py", key(it)))
