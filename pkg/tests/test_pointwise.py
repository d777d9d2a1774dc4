import numpy as np
import pytest

from cdspaces.cdcheck.pointwise import (
    composite_midpoint,
    entropy_verdicts,
    midpoint_entropy_test,
    pointwise_cd_check,
    push_midpoint,
)
from cdspaces.measure import SpaceParams, block_measure, build_grid
from cdspaces.profiles import DEFAULT_K, preset
from cdspaces.transport import build_structured_map

K = DEFAULT_K


@pytest.fixture(scope="module")
def main_map():
    p = SpaceParams(preset("valley", K), K)
    g = build_grid(p, 64, 16)
    mu0 = block_measure(g, -0.875, -0.375, shape="smooth", u_shape="smooth")
    mu1 = block_measure(g, 0.25, 0.875)
    return build_structured_map(mu0, mu1)


def test_main_instance_pointwise(main_map):
    r = pointwise_cd_check(main_map, 515.0)
    assert r.passed
    assert r.min_slack >= -1e-4
    assert r.point_count == main_map.mu0.support.size - r.excluded_count
    assert set(r.case_counts) <= {"V", "D", "H0", "H1"}
    assert r.slack.shape == r.cells.shape


def test_pointwise_monotone_in_N(main_map):
    a = pointwise_cd_check(main_map, 515.0)
    b = pointwise_cd_check(main_map, 1030.0)
    assert (not a.passed) or b.passed


def test_entropy_convexity_main(main_map):
    verdicts, mu_half, lost = midpoint_entropy_test(main_map)
    assert lost <= 1e-8
    assert abs(mu_half.mass.sum() - 1) < 1e-12
    assert all(v.passed for v in verdicts)
    assert [v.N for v in verdicts] == [515.0, 1030.0, np.inf]


def test_midpoint_x_is_average(main_map):
    T = main_map
    g = T.grid
    s = T.mu0.support[:50]
    mx, my, codes = composite_midpoint(T, g.x[s], g.u[s])
    np.testing.assert_allclose(mx, 0.5 * (g.x[s] + T.T1(g.x[s])), atol=1e-15)
    assert np.all(codes >= 2)


def test_translation_has_zero_gap():
    c = 2.0 ** -15
    p = SpaceParams(preset("constant", c), c)
    g = build_grid(p, 32, 8)
    T = build_structured_map(block_measure(g, -1, -0.5), block_measure(g, 0, 0.5))
    r = pointwise_cd_check(T, 515.0)
    assert abs(r.min_slack) < 1e-12
    verdicts, _, _ = midpoint_entropy_test(T)
    for v in verdicts:
        assert abs(v.gap) < 1e-12


def test_identity_midpoint_is_identity():
    p = SpaceParams(preset("valley", K), K)
    g = build_grid(p, 32, 8)
    mu = block_measure(g, -0.5, 0.5, shape="smooth", u_shape="smooth")
    T = build_structured_map(mu, mu)
    mu_half, lost = push_midpoint(T)
    np.testing.assert_allclose(mu_half.mass, mu.mass, atol=1e-14)


def test_entropy_verdict_sign():
    p = SpaceParams(preset("valley", K), K)
    g = build_grid(p, 32, 8)
    spread = block_measure(g, -1, 1)
    narrow = block_measure(g, -0.125, 0.125)
    # a concentrated midpoint between spread endpoints breaks convexity
    v = entropy_verdicts(spread, narrow, spread, [515.0, np.inf])
    assert not any(x.passed for x in v)
    v = entropy_verdicts(narrow, spread, narrow, [515.0, np.inf])
    assert all(x.passed for x in v)
