import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# One summary line per acceptance criterion, printed after the run whatever
# the capture mode.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
