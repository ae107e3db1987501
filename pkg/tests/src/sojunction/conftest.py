import numpy as np
import pytest

from sojunction.junction._fockspace import enumerate_basis
from sojunction.junction._params import ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def single_basis():
    return enumerate_basis(1, 4)


@pytest.fixture
def small_basis():
    return enumerate_basis(3, 4)


@pytest.fixture
def generic_params():
    return ModelParams(J=1.0, Omega=0.7, gamma=0.23, g=1.3, beta=0.2, N=3)


@pytest.fixture
def random_amplitudes(rng):
    def draw(n_modes=4, norm=1.0):
        x = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
        return x * np.sqrt(norm) / np.linalg.norm(x)

    return draw
