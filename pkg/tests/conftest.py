import numpy as np
import pytest

from residual_lab import maps


@pytest.fixture
def doubling():
    return maps.doubling_1d()


@pytest.fixture
def shifted():
    return maps.shifted_doubling_1d()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
