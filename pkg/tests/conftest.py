import numpy as np
import pytest

from smpnp.mesh import generate_cube_mesh


REFERENCE_TET = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture(scope="session")
def cube4():
    return generate_cube_mesh(4)


@pytest.fixture(scope="session")
def cube8():
    return generate_cube_mesh(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
