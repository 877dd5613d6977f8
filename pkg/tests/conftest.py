import numpy as np
import pytest

from mnir.datasets import load_congress, load_we8there


@pytest.fixture(scope="session")
def congress():
    return load_congress()


@pytest.fixture(scope="session")
def we8there():
    return load_we8there()


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)
