import numpy as np
import pytest

from config import get_settings
from linsolve import polar_mesh, radial_mesh, rect_mesh


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ball3_mesh():
    return radial_mesh(3, 129)


@pytest.fixture
def disk_radial_mesh():
    return radial_mesh(2, 257)


@pytest.fixture
def square_mesh():
    return rect_mesh(1.0, 1.0, 33, 33)


@pytest.fixture
def disk_mesh():
    return polar_mesh(24, 48)
