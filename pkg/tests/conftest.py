import pytest


def pytest_configure(config):
    config.acceptance_results = {}


@pytest.fixture
def record_criterion(request):
    """Store a one-line verdict for the acceptance summary printed at the end of the run."""

    def record(number: int, title: str, ok: bool, detail: str) -> str:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        request.config.acceptance_results[number] = line
        print(line)
        return line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
