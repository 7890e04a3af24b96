import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_ds():
    from rkhs_closure.data import TimeSeriesDataset

    return TimeSeriesDataset(0.01, [1, 2, 3, 4, 5], [10, 20, 30, 40, 50])
