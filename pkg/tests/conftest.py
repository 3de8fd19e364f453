import pytest

from poolscreen import calibration


@pytest.fixture(scope="session")
def cost_profile():
    return calibration.bundled_cost_profile()


@pytest.fixture(scope="session")
def oracle_design1():
    return calibration.bundled_oracle_profile("design1")


@pytest.fixture(scope="session")
def oracle_design2():
    return calibration.bundled_oracle_profile("design2")


@pytest.fixture(scope="session")
def oracle_design3():
    return calibration.bundled_oracle_profile("design3")
