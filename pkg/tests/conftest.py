import numpy as np
import pytest

from problems import SukpInstance


@pytest.fixture
def instance_e():
    """Two items over three elements; item0 covers {e0, e1}, item1 covers {e1, e2}."""
    return SukpInstance(
        profits=[7, 9],
        weights=[2, 3, 6],
        capacity=9,
        incidence=[[1, 1, 0], [0, 1, 1]],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
