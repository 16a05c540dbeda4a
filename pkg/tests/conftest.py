import numpy as np
import pytest

from fkripple import potential
from fkripple.params import ModelParams
from fkripple.relax import relax_approximant

# One pass/fail line per acceptance criterion, echoed at the end of the run.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def table(params):
    return potential.tabulate(params)


@pytest.fixture(scope="session")
def table10(table):
    from dataclasses import replace

    return replace(table, params=table.params.with_beta(10.0))


@pytest.fixture(scope="session")
def relaxed_2566(table):
    return relax_approximant(2555, 2566, table)


@pytest.fixture(scope="session")
def relaxed_35(table):
    return relax_approximant(34, 35, table, tol=1e-11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
