import numpy as np
import pytest

from extmix.model import scenario_params, simulate_model


@pytest.fixture(scope="session")
def scenario11_data():
    rng = np.random.default_rng(20240611)
    return simulate_model(scenario_params("1.1"), 2000, rng)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_log():
    """Record one summary line per acceptance criterion, printed at session end."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
