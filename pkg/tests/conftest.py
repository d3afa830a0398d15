import numpy as np
import pytest

from hitchin_bvp.mods import selftest
from hitchin_bvp.utils.logging import Log
from hitchin_bvp.utils.rng import generator

FLAT_LITERAL = {"grade": 3, "coeffs": {"4 5 6": 1, "2 3 4": -1, "1 3 5": 1, "1 2 6": -1}}


@pytest.fixture(autouse=True)
def quiet_log():
    level = Log.level
    Log.configure(quiet=True)
    yield
    Log.level = level


@pytest.fixture
def rng(request):
    return generator(0, "tests", request.node.name)


@pytest.fixture
def stable_form(rng):
    return selftest.random_stable_form(rng)


@pytest.fixture
def orientation_preserving(rng):
    def make(spread=0.3):
        g = np.eye(6) + spread * rng.standard_normal((6, 6))
        if np.linalg.det(g) < 0:
            g[:, 0] *= -1.0
        return g
    return make
