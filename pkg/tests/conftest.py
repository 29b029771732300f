import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# first calls may trigger numba compilation; per-example deadlines would be meaningless
settings.register_profile("agess", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("agess")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
