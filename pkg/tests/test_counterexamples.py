import numpy as np
import pytest

from cdspaces.cdcheck.counterexamples import (
    GeometryError,
    branching_demo,
    no_map_demo,
    strict_cd_restriction_search,
    structured_family,
)
from cdspaces.measure import SpaceParams, block_measure, build_grid, fiber_measure
from cdspaces.profiles import DEFAULT_K, preset

K = DEFAULT_K


@pytest.mark.parametrize("name, kw", [("cone", {"variant": "noncompact", "R": 1.0}),
                                      ("ramp-smoothed", {"singular": True})])
def test_branching_witness(name, kw):
    g = build_grid(SpaceParams(preset(name, K), K, **kw), 64, 64)
    b = branching_demo(block_measure(g, -0.6, -0.4), fiber_measure(g, 0.5))
    assert b.verified, b.reason
    assert b.forced_sources
    w = b.witnesses[0]
    assert w.t_star > 0 and w.agreement_error <= 1e-10
    assert b.duality_gap <= 1e-9 * b.cost


def test_no_branching_on_constant_profile():
    g = build_grid(SpaceParams(preset("constant", K), K), 64, 64)
    b = branching_demo(block_measure(g, -0.6, -0.4), fiber_measure(g, 0.5))
    assert not b.verified and not b.witnesses


def test_no_map():
    f = preset("cone", 0.2)
    v = no_map_demo(f, [-0.5, -0.45, -0.4, -0.35], 0.5, 0.01, 8)
    assert v.no_map
    assert v.cost_residual <= 1e-15
    assert v.plans_enumerated == 2520
    assert v.optimal_plans == v.plans_enumerated
    assert v.map_induced_optimal == 0
    one = no_map_demo(f, [-0.5], 0.5, 0.01, 2)
    assert one.no_map and one.plans_enumerated == 1


def test_no_map_guards():
    f = preset("cone", 0.2)
    with pytest.raises(GeometryError):
        no_map_demo(f, [0.5], 0.6, 0.01, 2)
    with pytest.raises(GeometryError):
        no_map_demo(f, [-0.5], 0.5, 0.2, 2)
    with pytest.raises(ValueError):
        no_map_demo(f, [-0.5, -0.4, -0.3], 0.5, 0.01, 4)


@pytest.fixture(scope="module")
def strict_setup():
    g = build_grid(SpaceParams(preset("ramp-smoothed", K), K, singular=True), 32, 8)
    fam = structured_family(block_measure(g, -0.375, -0.125), block_measure(g, 0.625, 0.875))
    return g, fam


def test_strict_search_completes(strict_setup):
    g, fam = strict_setup
    rep = strict_cd_restriction_search(g, fam)
    names = [r.name for r in rep.results]
    assert names == ["all", "single", "upper-half", "lower-half", "left-sources", "right-sources"]
    assert rep.outcome in ("violation-found", "inconclusive")
    assert rep.worst_gap == min(min(r.gaps.values()) for r in rep.results)
    single = rep.results[1]
    assert single.degenerate and single.gaps == {515.0: 0.0}
    assert abs(rep.results[0].gaps[515.0]) < 1e-6


def test_strict_search_custom_restriction(strict_setup):
    g, fam = strict_setup
    rep = strict_cd_restriction_search(g, fam, {"all": lambda fm: np.ones(fm.weights.size)})
    assert rep.results[0].curves == fam.weights.size
