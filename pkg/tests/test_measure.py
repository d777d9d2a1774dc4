import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdspaces.measure import (
    DiscreteMeasure,
    SpaceParams,
    block_measure,
    boltzmann_entropy,
    build_grid,
    c_K,
    density_m,
    fiber_measure,
    gauss_partial,
    gauss_partial_inv,
    rebin,
    renyi_entropy,
)
from cdspaces.profiles import DEFAULT_K, preset, profile_from_source

K = DEFAULT_K


def test_c_K_values():
    assert c_K(1.0) == pytest.approx(0.5 * math.sqrt(math.pi) * math.erf(1.0), abs=1e-12)
    assert c_K(1.0) == pytest.approx(0.7468241328124271, abs=1e-12)
    # series sum_n (-K)^n / (n! (2n+1)) at K = 1
    series = sum((-1.0) ** n / (math.factorial(n) * (2 * n + 1)) for n in range(30))
    assert c_K(1.0) == pytest.approx(series, abs=1e-12)
    assert c_K(16.0) == pytest.approx(0.2215567279473922, abs=1e-12)
    assert c_K(16.0) < c_K(1.0)
    assert c_K(1e-12) == pytest.approx(1.0, abs=1e-9)


def test_gauss_partial_roundtrip():
    u = np.linspace(0, 1, 11)
    np.testing.assert_allclose(gauss_partial_inv(16.0, gauss_partial(16.0, u)), u, atol=1e-12)
    assert gauss_partial(16.0, 1.0) == pytest.approx(c_K(16.0), abs=1e-14)


def test_density_examples(valley_space):
    f = preset("constant", K)
    p = SpaceParams(f, K, 16.0)
    c = float(f(0.0))
    assert density_m((0.3, 0.0), p) == pytest.approx(1 / c)
    assert density_m((0.3, c), p) == pytest.approx(math.exp(-16) / c)
    g = profile_from_source(repr(2.0 ** -15), K)
    q = SpaceParams(g, 2.0 ** -14, 16.0)
    assert density_m((0.0, 2.0 ** -16), q) == pytest.approx(2.0 ** 15 * math.exp(-4), rel=1e-14)
    with pytest.raises(ZeroDivisionError):
        density_m((-0.5, 0.0), SpaceParams(preset("ramp-smoothed", K), K, singular=True))


@pytest.mark.parametrize("name", ["constant", "valley", "ramp-smoothed", "cone"])
@pytest.mark.parametrize("nx, nu", [(32, 8), (64, 16)])
def test_column_marginal_is_C_K(name, nx, nu):
    p = SpaceParams(preset(name, K), K, singular=name in ("ramp-smoothed", "cone"))
    g = build_grid(p, nx, nu)
    col = g.column_mass()
    np.testing.assert_allclose(col / g.dx, g.C_K, atol=1e-10)
    assert col.sum() == pytest.approx(2 * g.C_K, abs=1e-9)
    if g.singular_col.any():
        atoms = g.uj < 0
        np.testing.assert_allclose(g.w[atoms], g.C_K * g.dx, rtol=1e-15)


def test_noncompact_grid_has_uniform_width():
    p = SpaceParams(preset("cone", K), K, variant="noncompact", R=2.0)
    g = build_grid(p, 16, 4)
    assert g.ncols == 32
    assert g.dx == pytest.approx(2 / 16)
    np.testing.assert_allclose(g.column_mass() / g.dx, g.C_K, atol=1e-10)


def test_grid_requires_singular_flag():
    with pytest.raises(ValueError):
        SpaceParams(preset("ramp-smoothed", K), K)


def test_entropy_oracles(valley_grid):
    g = valley_grid
    M = g.w.sum()
    uni = DiscreteMeasure(g, np.full(g.ncells, 1.0 / M))
    for N in (2.0, 515.0):
        assert renyi_entropy(uni, N) == pytest.approx(-M ** (1 / N), rel=1e-12)
    assert boltzmann_entropy(uni) == pytest.approx(-math.log(M), rel=1e-12)
    i = 37
    w = g.w[i]
    mass = np.zeros(g.ncells)
    mass[i] = 1.0
    one = DiscreteMeasure.from_mass(g, mass)
    assert renyi_entropy(one, 515.0) == pytest.approx(-w ** (1 / 515.0), rel=1e-12)
    assert boltzmann_entropy(one) == pytest.approx(-math.log(w), rel=1e-12)


def test_two_cell_entropy_and_limit(valley_grid):
    g = valley_grid
    # two cells of one fiber row have the same weight
    i, j = g.cell_index(10, 3), g.cell_index(20, 3)
    w = g.w[i]
    assert g.w[j] == pytest.approx(w, rel=1e-14)
    mass = np.zeros(g.ncells)
    mass[[i, j]] = 0.5
    mu = DiscreteMeasure.from_mass(g, mass)
    for N in (2.0, 50.0):
        assert renyi_entropy(mu, N) == pytest.approx(-2 ** (1 / N) * w ** (1 / N), rel=1e-12)
    ent = boltzmann_entropy(mu)
    errs = [abs(N + N * renyi_entropy(mu, N) - ent) for N in (1e3, 1e4)]
    assert errs[1] < errs[0]
    assert errs[1] == pytest.approx(errs[0] / 10, rel=0.05)


def test_entropy_rejects_small_N(valley_grid):
    mu = block_measure(valley_grid, -0.5, 0.0)
    with pytest.raises(ValueError):
        renyi_entropy(mu, 1.0)


@given(st.floats(0.1, 10.0), st.floats(1.5, 1000.0))
def test_entropy_scaling(c, N):
    p = SpaceParams(preset("valley", K), K)
    g = build_grid(p, 16, 4)
    mu = block_measure(g, -0.7, 0.2, shape="smooth", u_shape="smooth")
    g2 = build_grid(p, 16, 4)
    g2.w = g.w * c
    mu2 = DiscreteMeasure(g2, mu.density / c)
    assert renyi_entropy(mu2, N) == pytest.approx(c ** (1 / N) * renyi_entropy(mu, N), rel=1e-12)
    assert boltzmann_entropy(mu2) == pytest.approx(boltzmann_entropy(mu) - math.log(c), abs=1e-12)


def test_renyi_refinement_order():
    p = SpaceParams(preset("valley", K), K)
    vals = []
    for n in (16, 32, 64, 128):
        g = build_grid(p, n, n // 4)
        vals.append(renyi_entropy(block_measure(g, -0.5, 0.5, shape="smooth", u_shape="smooth"), 3.0))
    d = np.abs(np.diff(vals))
    order = np.log2(d[:-1] / d[1:])
    assert np.all(order >= 0.9)


def test_noncompact_truncation_locality():
    vals = []
    for R in (2.0, 4.0):
        p = SpaceParams(preset("cone", K), K, variant="noncompact", R=R)
        g = build_grid(p, 32, 8)
        vals.append(renyi_entropy(block_measure(g, -0.5, 0.5), 515.0))
    assert abs(vals[0] - vals[1]) < 1e-12


def test_measure_validation(valley_grid):
    with pytest.raises(ValueError):
        DiscreteMeasure(valley_grid, np.zeros(valley_grid.ncells))
    with pytest.raises(ValueError):
        block_measure(valley_grid, 0.5, 0.5)


def test_fiber_measure_on_singular_column():
    p = SpaceParams(preset("ramp-smoothed", K), K, singular=True)
    g = build_grid(p, 32, 8)
    mu = fiber_measure(g, -0.5)
    assert mu.support.size == 1
    assert g.uj[mu.support[0]] == -1


def test_rebin_reports_loss(valley_grid):
    g = valley_grid
    x = np.array([0.1, 0.2, 5.0])
    y = np.array([0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        rebin(g, x, y, np.array([0.4, 0.4, 0.2]))
    mu, lost = rebin(g, x[:2], y[:2], np.array([0.5, 0.5]))
    assert lost == 0.0 and mu.support.size == 2
