import numpy as np
import pytest

from bnpqueue import ServiceDist


@pytest.fixture
def exp1():
    return ServiceDist.exponential(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
