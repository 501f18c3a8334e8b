import numpy as np
import pytest

from dtcsim import oracle
from dtcsim.dicke import DickeSpace
from dtcsim.liouvillian import ModelParams


def random_density(n, rng, rank=None):
    dim = 2**n
    a = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_symmetric_state(n, rng):
    """Permutation average of a random density matrix, in symmetric coefficients."""
    return oracle.dense_to_sym(random_density(n, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params4():
    return ModelParams(4, gamma=1.0, g=0.5, f=1.0, pump_w=2.0)


@pytest.fixture
def space4():
    return DickeSpace(4)
