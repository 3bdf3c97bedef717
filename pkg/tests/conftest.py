import pytest

_LINES = []


@pytest.fixture
def criterion_log():
    """Record one pass/fail line per acceptance criterion."""

    def log(cid, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}"
        print(line)
        _LINES.append(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
