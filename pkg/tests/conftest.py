import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def pg_minimize(grad, project, x0, step, tol=1e-10, max_iter=200_000):
    """Projected gradient descent run until successive iterates move less than ``tol``."""
    x = project(np.asarray(x0, dtype=np.float64))
    for _ in range(max_iter):
        x_new = project(x - step * grad(x))
        if np.linalg.norm(x_new - x) <= tol:
            return x_new
        x = x_new
    raise AssertionError("projected gradient oracle did not converge")


def uniform_in_ball(rng, n, radius=1.0, center=None):
    u = rng.standard_normal(n)
    u *= radius * rng.random() ** (1.0 / n) / np.linalg.norm(u)
    return u if center is None else center + u


def on_sphere(rng, n, radius=1.0):
    u = rng.standard_normal(n)
    return radius * u / np.linalg.norm(u)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
