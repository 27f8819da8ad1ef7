import itertools

import pytest

from marketsim.core import Task

_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(name, ok, detail)."""
    def record(name: str, ok: bool, detail: str = "") -> bool:
        _criteria.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _criteria:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


_ids = itertools.count(1000)


def make_task(arrival=0.0, size=10.0, deadline=75.0, value=0.5, owner=0, id=None):
    return Task(id=next(_ids) if id is None else id, owner=owner, arrival_time=arrival,
                size=size, deadline=deadline, value=value)
