import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_complex(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
