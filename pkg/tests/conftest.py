import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def eval_sine_series(op, coeffs, xs):
    """Direct sine-sum evaluation, independent of the operator's cached
    transform matrices."""
    k = np.arange(1, op.num_modes + 1)
    return np.sqrt(2.0 / op.length) * (
        np.sin(np.outer(xs, k) * np.pi / op.length) @ coeffs)


def midpoint_integral(f, a, b, n):
    """Composite midpoint rule for a vectorized callable."""
    xs = a + (np.arange(n) + 0.5) * (b - a) / n
    return float(np.sum(f(xs)) * (b - a) / n)
