import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from matkowski.fncore import Interval, RealFn

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def fn(expr, lo=-np.inf, hi=np.inf, derivs=(), hint="unknown", name=""):
    """Shorthand for a RealFn on ]lo, hi[."""
    return RealFn(expr, Interval(lo, hi), tuple(derivs), hint, name)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
