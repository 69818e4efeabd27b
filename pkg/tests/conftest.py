import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Store a pass/fail line for an acceptance criterion; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str):
        _CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
