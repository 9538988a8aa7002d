import pytest

from wdmsim.topology import builtin_topology


@pytest.fixture
def ring():
    return builtin_topology("ring5")


@pytest.fixture
def switch():
    return builtin_topology("single-switch")


VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
