import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Record and print a one-line verdict, then assert it."""

    def _report(number, title, passed, detail):
        line = f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert passed, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
