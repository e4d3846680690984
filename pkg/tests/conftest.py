import numpy as np
import pytest

from csgrav.services.algebra import Signature
from csgrav.services.jetfields import Chart


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def sig():
    return Signature()


@pytest.fixture
def chart3():
    return Chart.periodic([1.0, 1.0, 1.0])


@pytest.fixture
def chart4():
    return Chart.periodic([1.0, 1.0, 1.0, 1.0])


@pytest.fixture
def points3(chart3):
    return chart3.random_points(np.random.default_rng(7), 20)


@pytest.fixture
def points4(chart4):
    return chart4.random_points(np.random.default_rng(8), 20)
