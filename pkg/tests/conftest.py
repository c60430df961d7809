import numpy as np
import pytest

from fermirg.config import FermiRGConfig
from fermirg.insulator import build_model, greens, k_kernel, omega_expansion
from fermirg.kernels import Lattice


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def desk_config():
    return FermiRGConfig()


@pytest.fixture
def small_lattice():
    """Half-integer spacings keep 1/vol exact."""
    return Lattice(1, 4, 4, 0.5, 0.25)


@pytest.fixture(scope="module")
def desk_model():
    return build_model(FermiRGConfig())


@pytest.fixture(scope="module")
def desk_series(desk_model):
    return omega_expansion(desk_model)


@pytest.fixture(scope="module")
def desk_greens(desk_model, desk_series):
    return greens(desk_model, "amputated", desk_series)


@pytest.fixture(scope="module")
def desk_k(desk_model):
    return k_kernel(desk_model.v0, desk_model.covariance)
