import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cdspaces.geometry import (
    MidpointError,
    PairClass,
    SingularRegionError,
    build_family,
    classify_pair,
    dist_inf,
    forced_segment_witness,
    geodesic_refine,
    midpoint,
    midpoint_arrays,
    ytilde,
)
from cdspaces.profiles import DEFAULT_K, preset

K = DEFAULT_K


def test_distance():
    assert dist_inf((0, 0), (3, 1)) == 3
    assert dist_inf((1, 2), (1, 2)) == 0
    assert dist_inf((0, 0), (1, 1)) == 1


@pytest.mark.parametrize("delta, cls", [((1, 2), PairClass.V), ((2, 0.5), PairClass.H0),
                                        ((2, 1.5), PairClass.H1), ((1, 1), PairClass.D),
                                        ((2, 1), PairClass.H0), ((-2, -1.5), PairClass.H1)])
def test_classes(delta, cls):
    assert classify_pair((0, 0), delta) == cls


@given(st.floats(-0.9, 0.9), st.floats(0.01, 0.9), st.floats(0.0, 1.0))
def test_ytilde_constant_profile(x0, d, s):
    c = 0.5
    f = lambda x: np.full_like(np.asarray(x, dtype=float), c)
    assert ytilde(x0, x0 + d, s * c, f) == pytest.approx(d / 4, abs=1e-15)


def test_ytilde_valley_bound():
    f = preset("valley", K)
    x0, x1 = 0.0, 0.1
    yt = ytilde(x0, x1, 0.0, f)
    d = x1 - x0
    loose = (2 * K * K + 4 * K) * d / (2 * f(x1))
    tight = (2 * K * K + 4 * K) * (d / 2) ** 2 / f(x1)
    assert abs(yt - d / 4) <= tight <= loose


@given(st.floats(-0.9, 0.8), st.floats(1e-6, 0.1), st.floats(0, 1))
def test_ytilde_excess_bound(x0, d, s):
    f = preset("valley", K)
    x1 = min(x0 + d, 1.0)
    d = x1 - x0
    yt = ytilde(x0, x1, s * float(f(x0)), f)
    assert abs(yt - d / 4) <= (2 * K * K + 4 * K) * (d / 2) ** 2 / float(f(x1)) * (1 + 1e-9) + 1e-18


def test_ytilde_rejects_collapsed_fiber():
    with pytest.raises(SingularRegionError):
        ytilde(-0.5, 0.5, 0.0, preset("ramp-smoothed", K))


def test_vertical_midpoint():
    f = preset("constant", 1.0 / 8)
    assert midpoint((0, 0), (0, 0.1), f) == pytest.approx((0.0, 0.05))


def test_constant_profile_h1_is_euclidean():
    f = lambda x: np.full_like(np.asarray(x, dtype=float), 1.0)
    xm, ym, codes = midpoint_arrays(0.0, 0.0, 1.0, 0.75, f)
    assert codes == 3
    assert (xm, ym) == pytest.approx((0.5, 0.375), abs=1e-15)


@given(st.floats(-1, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(0, 1))
def test_constant_profile_midpoints_are_euclidean(x0, s0, x1, s1):
    c = 0.2
    f = lambda x: np.full_like(np.asarray(x, dtype=float), c)
    xm, ym, code = midpoint_arrays(x0, s0 * c, x1, s1 * c, f, k=c)
    if code in (0, 1, 2):
        assert ym == pytest.approx(0.5 * (s0 + s1) * c, abs=1e-15)
    assert xm == pytest.approx(0.5 * (x0 + x1), abs=1e-15)


@given(st.floats(-1, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(0, 1))
def test_valley_midpoint_property(x0, s0, x1, s1):
    f = preset("valley", K)
    p = (x0, s0 * float(f(x0)))
    q = (x1, s1 * float(f(x1)))
    d = dist_inf(p, q)
    assume(d > 0)
    m = midpoint(p, q, f, k=K)
    assert abs(dist_inf(p, m) - d / 2) <= 10 * K * d
    assert abs(dist_inf(m, q) - d / 2) <= 10 * K * d
    assert -1e-12 <= m.y <= float(f(m.x)) + 1e-12


def test_point_outside_space_rejected():
    f = preset("valley", K)
    with pytest.raises(MidpointError):
        midpoint((0.0, 1.0), (0.5, 0.0), f)


def test_geodesic_trivial_cases():
    f = preset("valley", K)
    c = geodesic_refine((0.1, K / 2), (0.1, K / 2), f, depth=3)
    assert np.all(c.points == c.points[0])
    c = geodesic_refine((0.2, 0.0), (0.2, K), f, depth=4, k=K)
    np.testing.assert_allclose(c.points[:, 1], np.linspace(0, K, 17), atol=1e-20)
    g = preset("constant", 0.1)
    c = geodesic_refine((-0.5, 0.02), (0.5, 0.07), g, depth=5, k=0.1)
    np.testing.assert_allclose(c.points[:, 1], np.linspace(0.02, 0.07, 33), atol=1e-15)
    assert c.speed_defect() < 1e-14


def test_geodesic_depth_limits():
    with pytest.raises(ValueError):
        geodesic_refine((0, 0), (0.1, 0), preset("valley", K), depth=13)


def test_family_weights_and_restriction():
    f = preset("valley", K)
    fam = build_family([[-0.5, 0.0], [-0.4, 0.0]], [[0.5, K], [0.6, K]], [1.0, 3.0], f, depth=3, k=K)
    np.testing.assert_allclose(fam.weights, [0.25, 0.75])
    assert fam.evaluate(0.5).shape == (2, 2)
    sub = fam.restricted([1.0, 0.0])
    assert sub.weights.tolist() == [1.0]
    with pytest.raises(KeyError):
        fam.evaluate(0.3)


def test_witness_on_cone():
    f = preset("cone", K)
    w = forced_segment_witness((-0.5, 0.0), (0.5, 0.0), (0.5, K * 0.5), f, depth=6, k=K)
    assert w.t_star == pytest.approx(0.5)
    assert w.x_star == pytest.approx(0.0, abs=1e-12)
    assert w.agreement_error <= 1e-10
    assert w.separation == K * 0.5


def test_witness_on_ramp():
    f = preset("ramp-smoothed", K)
    q2 = (0.75, float(f(0.75)))
    w = forced_segment_witness((-0.25, 0.0), (0.75, 0.0), q2, f, depth=8, k=K)
    assert w.t_star == pytest.approx(0.25, abs=1e-12)
    assert w.agreement_error <= 1e-10
    assert w.separation == pytest.approx(q2[1])


def test_witness_needs_distinct_targets():
    with pytest.raises(ValueError):
        forced_segment_witness((-0.5, 0.0), (0.5, 0.0), (0.5, 0.0), preset("cone", K))
