import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the assertion stays in the test."""

    def record(number, title, passed, detail=""):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        _RESULTS.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS):
        terminalreporter.write_line(line)
