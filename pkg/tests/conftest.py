import pytest

from qanpon.defaults import DEFAULT_RAMAN
from qanpon.params import DetectorParams, ProtocolParams

# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def raman():
    return DEFAULT_RAMAN


@pytest.fixture
def protocol():
    return ProtocolParams()


@pytest.fixture
def detector():
    return DetectorParams()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
