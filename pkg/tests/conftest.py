import numpy as np
import pytest

from faradaylab import Params, make_grid


@pytest.fixture
def params():
    return Params()


@pytest.fixture
def small_grid(params):
    return make_grid(params, 8, 8, 13)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
