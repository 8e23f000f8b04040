import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from honeybloch.dirac_point import detect
from honeybloch.lattice import honeycomb_basis
from honeybloch.potential import three_cosine_potential

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _seed_numpy():
    np.random.seed(0)


@pytest.fixture(scope="session")
def unit_cell():
    return honeycomb_basis(1.0)


@pytest.fixture(scope="session")
def dirac_data(unit_cell):
    """Canonical vertex data: three-cosine potential, eps=1, a=1, M=12."""
    lat, dual = unit_cell
    return detect(three_cosine_potential(1.0, dual), lat, dual, M=12)
