import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Collect a one-line acceptance verdict for the terminal summary."""

    def _record(number, ok, detail, info=False):
        tag = "INFO" if info else ("PASS" if ok else "FAIL")
        ACCEPTANCE_LINES.append(f"criterion {number:<3} {tag}  {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
