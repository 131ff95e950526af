"""Shared fixtures; collects the acceptance verdicts for the terminal summary."""

import pytest

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record a named pass/fail line, then assert it."""

    def record(name: str, ok: bool, detail: str):
        ACCEPTANCE_RESULTS[name] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda n: int(n.split()[1].rstrip(":"))):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
