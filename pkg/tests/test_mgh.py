import numpy as np
import pytest

from cdspaces.cdcheck import MghTrace, hausdorff_vertical, mgh_harness
from cdspaces.profiles import preset

EPS = [2.0 ** -j for j in range(4, 8)]


@pytest.fixture(scope="module")
def trace():
    return mgh_harness(preset("ramp-smoothed", 0.2), EPS, 0.2, nx=32, nu=4)


def test_hausdorff_equals_eps():
    f = preset("ramp-smoothed", 0.2)
    for e in EPS:
        assert hausdorff_vertical(f, e) == pytest.approx(e, abs=1e-12)
    c = preset("constant", 0.2)
    assert hausdorff_vertical(c, 0.01) == pytest.approx(0.01)


def test_w1_matches_vertical_closed_form(trace):
    np.testing.assert_allclose(trace.w1, trace.w1_exact, rtol=1e-9)
    assert trace.hausdorff_ok
    assert trace.w1_decreasing
    assert abs(trace.limit) < 1e-3


def test_shifted_profile_must_stay_in_class():
    with pytest.raises(ValueError):
        mgh_harness(preset("ramp-smoothed", 0.2), [1.0, 0.5, 0.25], 0.2, nx=8)


def test_trace_validation():
    with pytest.raises(ValueError):
        MghTrace([0.1, 0.2], [0.1, 0.2], [1, 2], [1, 2], 0.0, 8, 4)
    with pytest.raises(ValueError):
        MghTrace([0.2, 0.1], [0.1], [1, 2], [1, 2], 0.0, 8, 4)
