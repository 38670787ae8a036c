import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dropflow.shapes import RadialShape

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_star_shape(rng, r=0.5, R=2.0, m=128, modes=4):
    """Random radial function with values in ``[r', R']`` and star radius >= ``r``."""
    while True:
        base = rng.uniform(0.9, 1.6)
        th = 2 * np.pi * np.arange(m) / m
        X = np.full(m, base)
        for k in range(1, modes + 1):
            amp = rng.uniform(0, 0.12) / k
            X = X + base * amp * np.cos(k * th + rng.uniform(0, 2 * np.pi))
        shape = RadialShape(X)
        from dropflow.shapes import star_radius

        if X.max() <= R and star_radius(shape) >= r:
            return shape


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
