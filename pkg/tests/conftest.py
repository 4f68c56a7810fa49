import pytest

# (criterion, passed, detail) lines recorded by the acceptance suite
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


@pytest.fixture
def record():
    def _record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        print(line)
        ACCEPTANCE_LINES.append((number, passed, detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
