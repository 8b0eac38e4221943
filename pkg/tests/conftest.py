from __future__ import annotations

import pytest

from hybridgrid import formats
from hybridgrid.grid_model import per_unit_normalize
from hybridgrid.opf import OBJECTIVES, solve_opf
from hybridgrid.scenario import OpfScenario

# lines printed by tests/test_acceptance.py, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ceder():
    return formats.load_network(formats.data_path(formats.CEDER_NETWORK))


@pytest.fixture(scope="session")
def ceder_pu(ceder):
    return per_unit_normalize(ceder)


@pytest.fixture(scope="session")
def ceder_econ():
    return formats.load_economics(formats.data_path(formats.CEDER_ECONOMICS))


@pytest.fixture(scope="session")
def solutions(ceder_pu):
    """Reference setting: storage at half power, grid consume-only."""
    return {k: solve_opf(ceder_pu, OpfScenario(k, 0.5, "consume")) for k in OBJECTIVES}
