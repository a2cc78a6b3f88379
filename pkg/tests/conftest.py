import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pqlap.eigen import first_eigenpair
from pqlap.grid import Grid1D

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid():
    return Grid1D(199)


@pytest.fixture(scope="session")
def fine_grid():
    return Grid1D(1999)


@pytest.fixture(scope="session")
def one(grid):
    return grid.constant(1.0)


@pytest.fixture(scope="session")
def eig(grid):
    cache = {}

    def get(r):
        if r not in cache:
            cache[r] = first_eigenpair(r, grid)
        return cache[r]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
