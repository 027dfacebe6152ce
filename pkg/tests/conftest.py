import numpy as np
import pytest

from roughdrift.fields import DriftField, SpaceTimeBox


@pytest.fixture(scope="session")
def box_1d():
    return SpaceTimeBox(1, 0.4, ((-4.0, 4.0),), (256,), 128)


@pytest.fixture(scope="session")
def small_box_1d():
    return SpaceTimeBox(1, 0.2, ((-4.0, 4.0),), (128,), 33)


@pytest.fixture(scope="session")
def box_2d():
    return SpaceTimeBox(2, 0.1, ((-2.0, 2.0), (-2.0, 2.0)), (48, 48), 17)


def make_const_drift(value, d=1, p=7.0, q=15.0):
    vec = np.broadcast_to(np.asarray(value, dtype=np.float64), (d,))

    def fn(t, x):
        return np.tile(vec, (x.shape[0], 1))

    return DriftField(fn, d, p, q, support_radius=100.0, name="const")


def make_linear_drift(slope=-1.0, d=1, p=7.0, q=15.0):
    def fn(t, x):
        return slope * x

    return DriftField(fn, d, p, q, support_radius=100.0, name="linear",
                      time_independent=True)


class ScalarField:
    """Tiny adapter turning f(t, x)->(n,) lambdas into solver forcings."""

    def __init__(self, fn, time_independent=True):
        self._fn = fn
        self.time_independent = time_independent

    def __call__(self, t, x):
        return self._fn(t, x)
