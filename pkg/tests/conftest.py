import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from negdef import (  # noqa: E402
    ConstructionParams,
    FreeAbelian,
    Heisenberg3,
    build_context,
    enumerate_balls,
    fit_growth_exponent,
    make_group,
    select_parameters,
)

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def z1():
    return make_group(FreeAbelian(1))


@pytest.fixture(scope="session")
def z2():
    return make_group(FreeAbelian(2))


@pytest.fixture(scope="session")
def heis():
    return make_group(Heisenberg3())


@pytest.fixture(scope="session")
def z1_table(z1):
    return enumerate_balls(z1, 60)


@pytest.fixture(scope="session")
def z2_table(z2):
    return enumerate_balls(z2, 60)


@pytest.fixture(scope="session")
def heis_small(heis):
    return enumerate_balls(heis, 12)


@pytest.fixture(scope="session")
def heis_table(heis):
    return enumerate_balls(heis, 40)


@pytest.fixture(scope="session")
def z1_ctx3(z1_table):
    """The worked context: beta 0.9, gamma 1.2, N 3, terms k = 1, 4."""
    return build_context(z1_table, ConstructionParams(0.9, 1.2, 3))


@pytest.fixture(scope="session")
def z1_demo(z1_table):
    fit = fit_growth_exponent(z1_table, (30, 60))
    beta, gamma = select_parameters(1.5, fit)
    return fit, build_context(z1_table, ConstructionParams(beta, gamma, 8, 1.5))


@pytest.fixture(scope="session")
def heis_demo(heis_table):
    fit = fit_growth_exponent(heis_table, (15, 40))
    beta, gamma = select_parameters(4.4, fit)
    return fit, build_context(heis_table, ConstructionParams(beta, gamma, 8, 4.4))
