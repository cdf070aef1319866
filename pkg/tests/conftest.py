import pytest
from hypothesis import HealthCheck, settings

from mhdlab import spectral as sp

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid32():
    return sp.Grid.square(32)


@pytest.fixture(scope="session")
def grid64():
    return sp.Grid.square(64)


@pytest.fixture(scope="session")
def grid3d():
    return sp.Grid.square(16, 3)
