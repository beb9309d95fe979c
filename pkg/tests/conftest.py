import pytest

import _shared


@pytest.fixture(scope="session")
def grid():
    return _shared.grid()


@pytest.fixture(scope="session")
def eta():
    return _shared.eta()


@pytest.fixture(scope="session")
def r0():
    return _shared.r0()


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.summary_lines():
            terminalreporter.write_line(line)
