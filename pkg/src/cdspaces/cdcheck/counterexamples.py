"""Branching, non-existence of optimal maps, and the strict-CD restriction search.

All three live on spaces whose profile vanishes on an interval, so part of
the space is a segment on the x-axis. A geodesic leaving the segment towards
a point at larger horizontal distance than height moves x at full speed and
is pinned to y = 0 while x stays in the zero set; two such geodesics to
different endpoints share that initial segment and then branch.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..geometry import (
    GeodesicFamily,
    build_family,
    dist_inf,
    dist_inf_arrays,
    forced_segment_witness,
)
from ..measure import DiscreteMeasure, rebin, renyi_entropy
from ..transport import Atoms, is_map_induced, solve_discrete_ot, structured_plan

AGREEMENT_TOL = 1e-10


@dataclass
class BranchingBundle:
    """Outcome of a branching run: the plan, the forced splits and their witnesses."""

    cost: float
    duality_gap: float
    forced_sources: list  # source atoms heavier than every target atom
    witnesses: list
    verified: bool
    reason: str
    family: Optional[GeodesicFamily] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "cost": self.cost, "duality_gap": self.duality_gap,
            "forced_sources": self.forced_sources,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "verified": self.verified, "reason": self.reason,
        }


def verify_witness(w, target_separation):
    """Agreement up to t* within tolerance, a nondegenerate shared segment, full separation."""
    return bool(w.t_star > 0.0 and w.agreement_error <= AGREEMENT_TOL and w.separation >= target_separation)


def _family_of_plan(plan, f, depth, k):
    P = plan.source.points[plan.src]
    Q = plan.target.points[plan.dst]
    return build_family(P, Q, plan.mass, f, depth, k, plan.src, plan.dst)


def branching_demo(mu0: DiscreteMeasure, mu1: DiscreteMeasure, depth=6, max_witnesses=4) -> BranchingBundle:
    """Solve the transport problem and exhibit forced-segment branching.

    A source atom heavier than every target atom is split by every plan,
    optimal or not. If it sits on the segment part and its targets are in
    horizontal position, the two geodesics to any two of its targets share
    the segment up to the end of the zero set, so the branching is present
    in every optimal plan's family.
    """
    g = mu0.grid
    f, k = g.params.f, g.params.k
    plan = solve_discrete_ot(mu0, mu1)
    family = _family_of_plan(plan, f, depth, k)
    A, B = plan.source, plan.target
    forced = np.flatnonzero(A.masses > B.masses.max())
    witnesses = []
    reason = "ok"
    for i in forced:
        sel = np.flatnonzero(plan.src == i)
        if sel.size < 2:
            continue
        p = A.points[i]
        if f(p[0]) != 0.0:
            reason = "split sources lie in the two-dimensional part"
            continue
        # the two targets of this source furthest apart
        Q = B.points[plan.dst[sel]]
        a, b = np.argmin(Q[:, 1]), np.argmax(Q[:, 1])
        if a == b or Q[a, 0] != Q[b, 0]:
            continue
        q1, q2 = Q[a], Q[b]
        w = forced_segment_witness(p, q1, q2, f, depth, k)
        # the plan's own curves for these two pairs follow the witness curves
        ca = family.curves[sel[a]]
        cb = family.curves[sel[b]]
        early = family.times <= w.t_star + 1e-15
        drift = float(max(np.abs(ca - w.curve1.points).max(), np.abs(cb - w.curve2.points).max(),
                          np.abs(ca[early] - cb[early]).max()))
        w.agreement_error = max(w.agreement_error, drift)
        if verify_witness(w, dist_inf(q1, q2)):
            witnesses.append(w)
        if len(witnesses) >= max_witnesses:
            break
    if forced.size == 0:
        reason = "no source atom is forced to split"
    elif not witnesses and reason == "ok":
        reason = "no verified witness"
    return BranchingBundle(float(plan.cost), float(plan.duality_gap), [int(i) for i in forced],
                           witnesses, bool(witnesses), reason if not witnesses else "ok", family)


@dataclass
class NoMapVerdict:
    cost_residual: float  # max over sources of (max - min) cost to the fiber
    optimal_cost: float
    plans_enumerated: int
    optimal_plans: int
    map_induced_optimal: int
    solver_plan_is_map: bool
    no_map: bool

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class GeometryError(ValueError):
    """The fiber is taller than the horizontal gap, so costs are not constant."""


def _unit_plans(src_units, n_targets):
    """All assignments of unit targets to sources with the given unit capacities."""
    slots = [i for i, c in enumerate(src_units) for _ in range(c)]
    seen = set()
    for perm in itertools.permutations(range(n_targets)):
        owner = tuple(slots[perm.index(j)] for j in range(n_targets))
        if owner in seen:
            continue
        seen.add(owner)
        yield owner


def no_map_demo(f, source_x, target_x, height, n_targets, enumerate_limit=50000) -> NoMapVerdict:
    """Equal-mass atoms on the segment part sent to a vertical fiber.

    With |target_x - source_x| > height every cost is |dx|^2 exactly, so each
    admissible plan is optimal. When n_targets is a multiple of the number of
    sources, the vertices of the transport polytope are the plans assigning
    each target atom to one source; they are enumerated and each is tested
    for being induced by a map.
    """
    xs = np.asarray(source_x, dtype=float)
    if np.any(np.asarray(f(xs)) != 0.0):
        raise GeometryError("sources must lie on the segment part (f = 0)")
    if height > f(target_x):
        raise GeometryError("target fiber leaves the space")
    if np.min(np.abs(target_x - xs)) <= height:
        raise GeometryError("fiber taller than the horizontal gap")
    n = xs.size
    ys = np.linspace(0.0, height, n_targets)
    P = np.column_stack([xs, np.zeros(n)])
    Q = np.column_stack([np.full(n_targets, float(target_x)), ys])
    d = dist_inf_arrays(P[:, None, 0], P[:, None, 1], Q[None, :, 0], Q[None, :, 1])
    C = d * d
    residual = float(np.max(C.max(axis=1) - C.min(axis=1)))
    a = np.full(n, 1.0 / n)
    b = np.full(n_targets, 1.0 / n_targets)
    plan = solve_discrete_ot(Atoms(P, a), Atoms(Q, b))
    solver_map = is_map_induced(plan).is_map
    if n_targets % n:
        raise ValueError("enumeration needs n_targets to be a multiple of the number of sources")
    units = [n_targets // n] * n
    total = math.factorial(n_targets) // math.factorial(n_targets // n) ** n
    if total > enumerate_limit:
        raise ValueError(f"{total} vertex plans exceed the enumeration limit")
    count = opt = maps = 0
    for owner in _unit_plans(units, n_targets):
        count += 1
        cost = sum(C[owner[j], j] * b[j] for j in range(n_targets))
        if abs(cost - plan.cost) <= 1e-15:
            opt += 1
            # a vertex plan is a map iff every source owns a single target
            if all(owner.count(i) <= 1 for i in range(n)):
                maps += 1
    return NoMapVerdict(residual, float(plan.cost), count, opt, maps, bool(solver_map),
                        bool(maps == 0 and not solver_map and residual <= 1e-15))


@dataclass
class RestrictionResult:
    name: str
    curves: int
    gaps: Dict[float, float]  # N -> 1/2 S(mu0) + 1/2 S(mu1) - S(mu_half)
    degenerate: bool
    lost: float

    def to_dict(self):
        return {"name": self.name, "curves": self.curves,
                "gaps": {("inf" if math.isinf(k) else repr(k)): v for k, v in self.gaps.items()},
                "degenerate": self.degenerate, "lost": self.lost}


@dataclass
class StrictSearchReport:
    results: list
    worst: str
    worst_gap: float
    tol: float
    violation_found: bool

    @property
    def outcome(self):
        return "violation-found" if self.violation_found else "inconclusive"

    def to_dict(self):
        return {"results": [r.to_dict() for r in self.results], "worst": self.worst,
                "worst_gap": self.worst_gap, "tol": self.tol,
                "violation_found": self.violation_found, "outcome": self.outcome}


def default_restrictions(family: GeodesicFamily, f) -> Dict[str, np.ndarray]:
    """Identity, one curve, upper/lower endpoint halves, left/right source halves."""
    start = family.curves[:, 0, :]
    end = family.curves[:, -1, :]
    fe = np.asarray(f(end[:, 0]), dtype=float)
    ue = np.where(fe > 0, end[:, 1] / np.where(fe > 0, fe, 1.0), 0.0)
    xm = float(np.median(start[:, 0]))
    single = np.zeros(family.weights.size)
    single[int(np.argmax(family.weights))] = 1.0
    return {
        "all": np.ones(family.weights.size),
        "single": single,
        "upper-half": (ue >= 0.5).astype(float),
        "lower-half": (ue < 0.5).astype(float),
        "left-sources": (start[:, 0] < xm).astype(float),
        "right-sources": (start[:, 0] >= xm).astype(float),
    }


def strict_cd_restriction_search(grid, family: GeodesicFamily, restrictions=None, N_list=(515.0,),
                                 tol=1e-8, max_loss=1e-8) -> StrictSearchReport:
    """Entropy convexity along reweighted sub-families of one geodesic plan.

    Each restriction reweights the curves, the three time marginals at
    t = 0, 1/2, 1 are re-binned to ``grid``, and the convexity gap is
    evaluated for each N. A restriction supported on one curve is a Dirac
    mass moving along a single geodesic; its gap is reported as 0 and the
    entry is flagged degenerate.
    """
    f = grid.params.f
    if restrictions is None:
        restrictions = default_restrictions(family, f)
    results = []
    for name, weight in restrictions.items():
        if callable(weight):
            weight = weight(family)
        fam = family.restricted(weight)
        degenerate = fam.weights.size == 1
        gaps = {}
        lost = 0.0
        if degenerate:
            gaps = {float(N): 0.0 for N in N_list}
        else:
            ms = []
            for t in (0.0, 0.5, 1.0):
                P = fam.evaluate(t)
                mu, l = rebin(grid, P[:, 0], P[:, 1], fam.weights, max_loss)
                ms.append(mu)
                lost += l
            for N in N_list:
                S = [renyi_entropy(m, N) for m in ms]
                gaps[float(N)] = 0.5 * S[0] + 0.5 * S[2] - S[1]
        results.append(RestrictionResult(name, int(fam.weights.size), gaps, degenerate, lost))
    worst = min(results, key=lambda r: min(r.gaps.values()))
    wg = float(min(worst.gaps.values()))
    return StrictSearchReport(results, worst.name, wg, float(tol), bool(wg < -tol))


def structured_family(mu0: DiscreteMeasure, mu1: DiscreteMeasure, depth=1) -> GeodesicFamily:
    """Geodesic family of the cell-level monotone plan between horizontally separated measures."""
    g = mu0.grid
    plan = structured_plan(mu0, mu1)
    return _family_of_plan(plan, g.params.f, depth, g.params.k)
