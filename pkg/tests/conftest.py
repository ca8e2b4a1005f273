import pytest

_acceptance_results = []


@pytest.fixture
def acceptance_record():
    """Collect one pass/fail line per acceptance criterion for the summary."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        _acceptance_results.append((criterion, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _acceptance_results:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {criterion}: {detail}")
