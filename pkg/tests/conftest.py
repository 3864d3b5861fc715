import pytest

from oscint.phase import ExpPhase, PowerPhase


@pytest.fixture
def power31():
    return PowerPhase(3.0, 1.0)


@pytest.fixture
def exp31():
    return ExpPhase(3.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
