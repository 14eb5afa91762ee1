import numpy as np
import pytest

from reebcurv import model_manifold


@pytest.fixture(scope="session")
def heis():
    return model_manifold("heisenberg_r3", grid=(8, 8, 8))


@pytest.fixture(scope="session")
def torus():
    return model_manifold("torus_xi_n", n=1, grid=(8, 8, 8))


@pytest.fixture(scope="session")
def mapping():
    return model_manifold("mapping_torus_box", grid=(8, 8, 8))


@pytest.fixture()
def probe():
    return np.array([[0.3], [0.7], [0.2]])


@pytest.fixture()
def probes():
    rng = np.random.default_rng(11)
    return rng.uniform(0.15, 0.85, size=(3, 40))
