import pytest

from wfapc.aero import AeroTables
from wfapc.turbine import TurbineParams


@pytest.fixture(scope="session")
def tables():
    return AeroTables.default()


@pytest.fixture(scope="session")
def params():
    return TurbineParams()
