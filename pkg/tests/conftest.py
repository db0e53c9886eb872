import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per criterion; the assertion stays in the test."""

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"ACCEPTANCE #{k} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        return ok

    return record
