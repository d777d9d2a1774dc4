"""Branching, no-map, box dimension and strict-search runs over a parameter sweep."""

import argparse
import json

from cdspaces.cdcheck import (
    box_dimension,
    branching_demo,
    no_map_demo,
    strict_cd_restriction_search,
    structured_family,
)
from cdspaces.measure import SpaceParams, block_measure, build_grid, fiber_measure
from cdspaces.profiles import DEFAULT_K, preset


def branching_sweep(k, nus):
    out = {}
    for nu in nus:
        sp = SpaceParams(preset("ramp-smoothed", k), k, singular=True)
        g = build_grid(sp, 64, nu)
        b = branching_demo(block_measure(g, -0.6, -0.4), fiber_measure(g, 0.5))
        out[nu] = {"verified": b.verified, "forced": len(b.forced_sources), "reason": b.reason}
    return out


def no_map_sweep(targets):
    f = preset("cone", 0.2)
    return {n: no_map_demo(f, [-0.5, -0.45, -0.4, -0.35], 0.5, 0.01, n).to_dict() for n in targets}


def dimension_sweep(k, jmax):
    f = preset("ramp-smoothed", k)
    eps = [2.0 ** -j for j in range(4, jmax + 1)]
    return {r: box_dimension(f, r, eps).slope for r in ("left", "right", "square")}


def strict_sweep(k, resolutions):
    out = {}
    for nx, nu in resolutions:
        g = build_grid(SpaceParams(preset("ramp-smoothed", k), k, singular=True), nx, nu)
        fam = structured_family(block_measure(g, -0.375, -0.125), block_measure(g, 0.625, 0.875))
        rep = strict_cd_restriction_search(g, fam, N_list=(515.0, 1030.0))
        out[f"{nx}x{nu}"] = {"outcome": rep.outcome, "worst": rep.worst, "gap": rep.worst_gap}
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=float, default=DEFAULT_K)
    ap.add_argument("--out", default="counterexamples.json")
    args = ap.parse_args()
    res = {
        "branching": branching_sweep(args.k, [16, 32, 64]),
        "no_map": no_map_sweep([4, 8]),
        "dimension": dimension_sweep(args.k, 11),
        "strict": strict_sweep(args.k, [(32, 8), (64, 16), (128, 16)]),
    }
    with open(args.out, "w") as fh:
        json.dump(res, fh, indent=2, sort_keys=True, default=str)
    print(json.dumps(res["dimension"], indent=2))
    print(json.dumps(res["strict"], indent=2))


if __name__ == "__main__":
    main()
