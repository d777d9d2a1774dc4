"""Acceptance criteria at their stated tolerances; one summary line per criterion."""

import time

import numpy as np
import pytest
from oracles import enumerate_vertex_optimum, observed_order

from cdspaces.cdcheck import (
    box_dimension,
    branching_demo,
    mgh_harness,
    no_map_demo,
    strict_cd_restriction_search,
    structured_family,
)
from cdspaces.cdcheck.pointwise import midpoint_entropy_test, pointwise_cd_check
from cdspaces.cli import LINE_PROFILES, main
from cdspaces.convexity import (
    SampledFunction,
    additivity_check,
    h_certificate,
    kn_certificate,
    line_profile_check,
    random_kn_function,
    sample_line,
)
from cdspaces.measure import SpaceParams, block_measure, build_grid, fiber_measure
from cdspaces.profiles import DEFAULT_K, preset, profile_from_source
from cdspaces.transport import Atoms, build_structured_map, cost_matrix, jacobi_residual, solve_discrete_ot

K_SPACE = 16.0
K_PROFILE = DEFAULT_K
N_PRIME = 515.0
EPS = [2.0 ** -j for j in range(4, 10)]


def _space(src, k=K_PROFILE):
    return SpaceParams(profile_from_source(src, k), k, K_SPACE)


@pytest.fixture(scope="module")
def main_runs():
    """Structured instances of the main verification at nx = 64, 128, 256 with nu = nx / 4."""
    sp = _space("valley")
    runs = {}
    for nx in (64, 128, 256):
        t0 = time.perf_counter()
        g = build_grid(sp, nx, nx // 4)
        mu0 = block_measure(g, -0.875, -0.375, shape="smooth", u_shape="smooth")
        mu1 = block_measure(g, 0.25, 0.875)
        T = build_structured_map(mu0, mu1)
        pw = {N: pointwise_cd_check(T, N) for N in (N_PRIME, 2 * N_PRIME)}
        ent, _, lost = midpoint_entropy_test(T, (N_PRIME, 2 * N_PRIME, np.inf))
        runs[nx] = {"pointwise": pw, "entropy": ent, "lost": lost, "seconds": time.perf_counter() - t0}
    return runs


def test_marginal_identity(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for src in LINE_PROFILES:
        sp = _space(src)
        for nx, nu in ((32, 8), (64, 16), (128, 32)):
            g = build_grid(sp, nx, nu)
            worst = max(worst, float(np.abs(g.column_mass() / g.dx - g.C_K).max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 1.0
    criterion(ok, f"max |marginal - C_K| = {worst:.2e}, {dt:.2f} s")
    assert ok


def test_convexity_calculus(criterion, rng):
    t0 = time.perf_counter()
    neglog = SampledFunction.from_callable(lambda t: (-np.log(t), -1 / t, 1 / t ** 2), 1.0, 2.0)
    quad = SampledFunction.from_callable(
        lambda t: (K_SPACE * t * t, 2 * K_SPACE * t, np.full_like(t, 2 * K_SPACE)), 0.0, 1.0)
    s1 = kn_certificate(neglog, 0.0, 1.0).min_slack
    s2 = kn_certificate(quad, 0.0, 2 * K_SPACE).min_slack
    pairs = 0
    for _ in range(200):
        g, K1, N1 = random_kn_function(rng)
        h, K2, N2 = random_kn_function(rng)
        r = additivity_check(g, h, K1, N1, K2, N2)
        pairs += r.first.passed and r.second.passed and r.total.passed
    d = 0.9 * 2.0 ** -11
    hs = min(h_certificate(A, delta).min_slack
             for A in np.linspace(0.0, 4.0, 20) for delta in np.linspace(-d, d, 20))
    dt = time.perf_counter() - t0
    ok = s1 >= -1e-9 and s2 >= -1e-9 and pairs == 200 and hs >= -1e-6 and dt < 30.0
    criterion(ok, f"examples {s1:.1e}, {s2:.1e}; additivity {pairs}/200; h grid min {hs:.2e}; {dt:.1f} s")
    assert ok


def test_line_estimate(criterion, rng):
    passed = 0
    worst = np.inf
    for n in range(50):
        sp = _space(LINE_PROFILES[n % len(LINE_PROFILES)])
        y = sample_line(sp.f, K_PROFILE, rng)
        assert y.d1.min() >= 0.25
        r = line_profile_check(sp, y, tol=1e-6)
        passed += r.certificate.passed
        worst = min(worst, r.certificate.min_slack)
    ok = passed == 50
    criterion(ok, f"{passed}/50 lines certified, min slack {worst:.3g}")
    assert ok


def test_main_cd_verification(criterion, main_runs):
    slack = {nx: r["pointwise"][N_PRIME].min_slack for nx, r in main_runs.items()}
    deficit = {nx: max(0.0, -s) for nx, s in slack.items()}
    if all(v == 0.0 for v in deficit.values()):
        order_ok, order = True, "no deficit at any resolution"
    else:
        o = observed_order([1 / nx for nx in deficit], [max(v, 1e-300) for v in deficit.values()])
        order_ok, order = o >= 1.0, f"deficit order {o:.2f}"
    ent_ok = all(v.passed for r in main_runs.values() for v in r["entropy"])
    gaps = {nx: min(v.gap for v in r["entropy"]) for nx, r in main_runs.items()}
    dt = main_runs[256]["seconds"]
    ok = min(slack.values()) >= -1e-4 and order_ok and ent_ok and dt < 120.0
    criterion(ok, f"min slack {min(slack.values()):.2e}; {order}; entropy gaps "
                  + ", ".join(f"{g:.1e}" for g in gaps.values()) + f"; nx=256 in {dt:.1f} s")
    assert ok


def test_power_mean_monotonicity(criterion, main_runs):
    checks = 0
    ok = True
    for r in main_runs.values():
        pw = r["pointwise"]
        ok &= (not pw[N_PRIME].passed) or pw[2 * N_PRIME].passed
        e = {v.N: v for v in r["entropy"]}
        ok &= (not e[N_PRIME].passed) or e[2 * N_PRIME].passed
        checks += 2
    criterion(ok, f"{checks} implications pass(N') => pass(2N') hold")
    assert ok


def test_transport_exactness(criterion, rng):
    matches = 0
    gaps = []
    for _ in range(100):
        n, m = rng.integers(1, 5, size=2)
        P, Q = rng.uniform(-1, 1, (n, 2)), rng.uniform(-1, 1, (m, 2))
        a, b = rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, m)
        a, b = a / a.sum(), b / b.sum()
        plan = solve_discrete_ot(Atoms(P, a), Atoms(Q, b))
        best = enumerate_vertex_optimum(a, b, cost_matrix(P, Q))
        matches += abs(plan.cost - best) <= 1e-12 * max(best, 1e-300) + 1e-16
        gaps.append(plan.duality_gap / max(plan.cost, 1e-300))
    g = build_grid(_space("valley"), 32, 8)
    for lo, hi in ((-1, -0.5), (-0.5, 0.0)):
        plan = solve_discrete_ot(block_measure(g, lo, hi, shape="smooth"), block_measure(g, 0.25, 1.0))
        gaps.append(plan.duality_gap / plan.cost)
    worst = max(gaps)
    ok = matches == 100 and worst <= 1e-9
    criterion(ok, f"{matches}/100 match enumeration; max relative duality gap {worst:.1e}")
    assert ok


def test_jacobi_residual(criterion):
    sp = _space("valley")
    res = {}
    for nx in (64, 128, 256):
        g = build_grid(sp, nx, nx)
        T = build_structured_map(block_measure(g, -0.875, -0.375, shape="smooth", u_shape="smooth"),
                                 block_measure(g, 0.25, 0.875))
        res[nx] = jacobi_residual(T).max_residual
    order = observed_order([1 / n for n in res], list(res.values()))
    ok = order >= 1.0 and res[256] <= 1e-2
    criterion(ok, "residuals " + ", ".join(f"{v:.2e}" for v in res.values()) + f"; order {order:.2f}")
    assert ok


def test_non_constant_dimension(criterion):
    f = preset("ramp-smoothed", K_PROFILE)
    left = box_dimension(f, "left", EPS).slope
    right = box_dimension(f, "right", EPS).slope
    square = box_dimension(f, "square", EPS).slope
    ok = abs(left - 1) <= 0.15 and abs(right - 2) <= 0.3 and abs(square - 2) <= 0.1 and len(EPS) >= 4
    criterion(ok, f"slopes left {left:.3f}, right {right:.3f}, square {square:.3f} over {len(EPS)} scales")
    assert ok


def test_branching_and_no_map(criterion):
    k = K_PROFILE
    spaces = {
        "cone": SpaceParams(preset("cone", k), k, K_SPACE, variant="noncompact", R=4.0),
        "ramp": SpaceParams(preset("ramp-smoothed", k), k, K_SPACE, singular=True),
    }
    verified = {}
    for name, sp in spaces.items():
        g = build_grid(sp, 64, 64)
        verified[name] = branching_demo(block_measure(g, -0.6, -0.4), fiber_measure(g, 0.5)).verified
    v = no_map_demo(preset("cone", 0.2), [-0.5, -0.45, -0.4, -0.35], 0.5, 0.01, 8)
    ok = all(verified.values()) and v.map_induced_optimal == 0 and v.no_map and v.cost_residual <= 1e-15
    criterion(ok, f"witnesses {verified}; {v.map_induced_optimal} map-induced of {v.optimal_plans} "
                  f"optimal vertex plans; residual {v.cost_residual:.1e}")
    assert ok


def test_mgh_convergence(criterion):
    tr = mgh_harness(preset("ramp-smoothed", 0.2), EPS, 0.2, K_SPACE, nx=256, nu=4)
    ok = tr.hausdorff_ok and tr.w1_decreasing and abs(tr.limit) < 1e-3
    criterion(ok, f"Hausdorff <= eps: {tr.hausdorff_ok}; W1 {tr.w1[0]:.2e} -> {tr.w1[-1]:.2e}; "
                  f"limit {tr.limit:.1e}")
    assert ok


def test_strict_cd_search(criterion):
    g = build_grid(SpaceParams(preset("ramp-smoothed", K_PROFILE), K_PROFILE, K_SPACE, singular=True), 64, 16)
    fam = structured_family(block_measure(g, -0.375, -0.125), block_measure(g, 0.625, 0.875))
    rep = strict_cd_restriction_search(g, fam, N_list=(N_PRIME,))
    # evidence grade: completion with a reported candidate is the criterion
    ok = len(rep.results) > 0 and np.isfinite(rep.worst_gap)
    criterion(ok, f"{rep.outcome}: worst restriction {rep.worst!r} with gap {rep.worst_gap:.3e}")
    assert ok


def test_determinism(criterion, tmp_path):
    same = []
    for args in (["convexity", "--seed", "5"], ["counterexample", "no-map"], ["counterexample", "dimension"]):
        blobs = []
        for rep in range(2):
            out = tmp_path / f"{args[0]}-{args[-1]}-{rep}"
            assert main([*args, "--out", str(out)]) == 0
            blobs.append((out / "report.json").read_bytes())
        same.append(blobs[0] == blobs[1])
    ok = all(same)
    criterion(ok, f"{sum(same)}/{len(same)} commands byte-identical across repeated runs")
    assert ok
