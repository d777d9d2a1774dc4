"""Command-line front end.

Every command writes ``report.json`` (deterministic given config and seed),
``meta.json`` (wall time) and CSV side files into the output directory.
Exit codes: 0 pass, 2 verified failure, 1 error (nothing written).
"""

import argparse
import json
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .cdcheck import (
    box_dimension,
    branching_demo,
    midpoint_entropy_test,
    mgh_harness,
    no_map_demo,
    pointwise_cd_check,
    strict_cd_restriction_search,
    structured_family,
)
from .cdcheck.pointwise import jacobian_terms
from .config import ConfigError, RunConfig, load_config, validate
from .convexity import (
    SampledFunction,
    additivity_check,
    case_certificate,
    h_certificate,
    kn_certificate,
    line_profile_check,
    random_kn_function,
    sample_case_data,
    sample_line,
)
from .measure import SpaceParams, block_measure, build_grid, fiber_measure
from .profiles import CLOSURE, F_K, preset, profile_from_source, validate_membership
from .transport import build_structured_map, jacobi_residual

SCHEMA = "cdspaces.report/v1"
EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
DEFAULT_EPS = [2.0 ** -i for i in range(4, 10)]
LINE_PROFILES = ["constant", "valley", "k*(2+sin(x))/2", "k*exp(x/2)", "k*(2-cos(x))"]


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


class Outputs:
    """Collects files in a scratch directory; moved into place only on success."""

    def __init__(self):
        self.tmp = tempfile.mkdtemp(prefix="cdspaces-")
        self.names = []

    def path(self, name):
        self.names.append(name)
        return os.path.join(self.tmp, name)

    def commit(self, out):
        os.makedirs(out, exist_ok=True)
        for n in self.names:
            shutil.move(os.path.join(self.tmp, n), os.path.join(out, n))
        self.discard()

    def discard(self):
        shutil.rmtree(self.tmp, ignore_errors=True)


def _space(cfg: RunConfig, profile=None, k=None, singular=False):
    k = cfg.k if k is None else k
    f = profile_from_source(profile or cfg.profile, k)
    return SpaceParams(f, k, cfg.K, variant=cfg.variant, R=cfg.R, singular=singular)


# commands -------------------------------------------------------------------


def cmd_validate_profile(cfg, out: Outputs):
    f = profile_from_source(cfg.profile, cfg.k)
    rep = validate_membership(f, cfg.k)
    xs = np.linspace(-1.0, 1.0, 513)
    np.savetxt(out.path("profile.csv"), np.column_stack([xs, f.eval(xs), f.eval_d1(xs), f.eval_d2(xs)]),
               delimiter=",", header="x,f,f1,f2", comments="", fmt="%.17g")
    passed = rep.cls in (F_K, CLOSURE)
    return {"membership": rep.to_dict()}, ["profile-class"], passed


def _verify_instance(cfg, nx, nu, out, suffix):
    sec = "verify-cd"
    sp = _space(cfg)
    g = build_grid(sp, nx, nu)
    lo0, hi0 = cfg.get_floats(sec, "mu0", [-0.875, -0.375])
    lo1, hi1 = cfg.get_floats(sec, "mu1", [0.25, 0.875])
    mu0 = block_measure(g, lo0, hi0, cfg.get_str(sec, "mu0_shape", "smooth", {"uniform", "smooth"}))
    mu1 = block_measure(g, lo1, hi1, cfg.get_str(sec, "mu1_shape", "uniform", {"uniform", "smooth"}))
    T = build_structured_map(mu0, mu1)
    tol = cfg.get_float(sec, "tol", 1e-4, 0.0)
    terms = jacobian_terms(T)
    Ns = [cfg.nprime, 2.0 * cfg.nprime]
    reports = [pointwise_cd_check(T, N, tol, terms) for N in Ns]
    verdicts, _, lost = midpoint_entropy_test(
        T, (cfg.nprime, 2.0 * cfg.nprime, math.inf), cfg.get_float(sec, "entropy_tol", 1e-8, 0.0),
        cfg.get_int(sec, "supersample", 4, 1))
    reports[0].to_csv(out.path(f"slack{suffix}.csv"), g)
    T.to_csv(out.path(f"map{suffix}.csv"))
    res = jacobi_residual(T)
    return {
        "nx": nx, "nu": nu,
        "pointwise": [r.to_dict() for r in reports],
        "entropy": [v.to_dict() for v in verdicts],
        "rebin_loss": lost,
        "jacobi_residual": {"max": res.max_residual, "mean": res.mean_residual},
        # pass at N' implies pass at 2N'
        "monotone": (not reports[0].passed) or reports[1].passed,
    }, all(r.passed for r in reports) and all(v.passed for v in verdicts)


def cmd_verify_cd(cfg, out):
    nxs = [int(v) for v in cfg.get_floats("verify-cd", "nx_list", [cfg.nx])]
    ratio = cfg.get_int("verify-cd", "nu_ratio", 0, 0)
    runs, ok = [], True
    for nx in nxs:
        nu = nx // ratio if ratio else cfg.nu
        r, p = _verify_instance(cfg, nx, nu, out, f"_nx{nx}")
        runs.append(r)
        ok = ok and p and r["monotone"]
    return {"runs": runs}, ["pointwise-jacobi-criterion", "midpoint-entropy-convexity",
                            "entropy-convexity", "jacobi-equation"], ok


def cmd_convexity(cfg, out):
    rng = np.random.default_rng(cfg.seed)
    K = cfg.K
    tol = 1e-9
    neglog = SampledFunction.from_callable(lambda t: (-np.log(t), -1.0 / t, 1.0 / t ** 2), 1.0, 2.0)
    quad = SampledFunction.from_callable(lambda t: (K * t * t, 2 * K * t, np.full_like(t, 2 * K)), -1.0, 1.0)
    examples = {"neg_log": kn_certificate(neglog, 0.0, 1.0, tol).to_dict(),
                "quadratic": kn_certificate(quad, 0.0, 2.0 * K, tol).to_dict()}
    pairs = cfg.get_int("convexity", "pairs", 200, 1)
    add_ok = 0
    for _ in range(pairs):
        g, K1, N1 = random_kn_function(rng)
        h, K2, N2 = random_kn_function(rng)
        r = additivity_check(g, h, K1, N1, K2, N2, tol)
        add_ok += bool(r.first.passed and r.second.passed and r.total.passed)
    grid_rows = []
    for A in np.linspace(0.0, 4.0, 20):
        for d in np.linspace(-0.9, 0.9, 20) * 2.0 ** -11:
            c = h_certificate(A, d)
            grid_rows.append((A, d, c.min_slack))
    grid_rows = np.array(grid_rows)
    np.savetxt(out.path("h_grid.csv"), grid_rows, delimiter=",", header="A,delta,min_slack", comments="",
               fmt="%.17g")
    h_min = float(grid_rows[:, 2].min())
    lines = cfg.get_int("convexity", "lines", 50, 1)
    line_min, line_ok = math.inf, True
    profiles = LINE_PROFILES
    for n in range(lines):
        sp = _space(cfg, profiles[n % len(profiles)])
        r = line_profile_check(sp, sample_line(sp.f, cfg.k, rng))
        line_min = min(line_min, r.certificate.min_slack)
        line_ok &= r.certificate.passed
    sp = _space(cfg, "valley")
    cases = {}
    for case in ("H0", "V", "D", "H1"):
        certs = [case_certificate(case, sample_case_data(case, sp.f, cfg.k, rng), sp) for _ in range(50)]
        cases[case] = {"min_slack": min(c.min_slack for c in certs), "passed": all(c.passed for c in certs),
                       "N": certs[0].N}
    verdicts = {
        "examples": examples,
        "additivity": {"pairs": pairs, "passed_pairs": add_ok},
        "bump_grid": {"min_slack": h_min, "passed": h_min >= -1e-6},
        "line_estimate": {"lines": lines, "min_slack": line_min, "passed": bool(line_ok)},
        "case_profiles": cases,
    }
    ok = (all(e["passed"] for e in examples.values()) and add_ok == pairs and h_min >= -1e-6 and line_ok
          and all(c["passed"] for c in cases.values()))
    return verdicts, ["kn-convexity-examples", "kn-additivity", "bump-construction", "line-estimate",
                      "case-profiles"], ok


def _branching(cfg, out):
    sec = "branching"
    nx = cfg.get_int(sec, "nx", 64, 2)
    nu = cfg.get_int(sec, "nu", 64, 2)
    lo, hi = cfg.get_floats(sec, "mu0", [-0.6, -0.4])
    x1 = cfg.get_float(sec, "target_x", 0.5)
    k = cfg.k
    spaces = {
        "cone-noncompact": SpaceParams(preset("cone", k), k, cfg.K, variant="noncompact", R=cfg.R),
        "ramp-singular": SpaceParams(preset("ramp-smoothed", k), k, cfg.K, singular=True),
        "control-constant": SpaceParams(preset("constant", k), k, cfg.K),
    }
    res = {}
    for name, sp in spaces.items():
        g = build_grid(sp, nx, nu)
        b = branching_demo(block_measure(g, lo, hi), fiber_measure(g, x1))
        res[name] = b.to_dict()
        if b.witnesses:
            w = b.witnesses[0]
            w.curve1.to_csv(out.path(f"witness_{name}_1.csv"))
            w.curve2.to_csv(out.path(f"witness_{name}_2.csv"))
    ok = (res["cone-noncompact"]["verified"] and res["ramp-singular"]["verified"]
          and not res["control-constant"]["witnesses"])
    return res, ["branching-geodesics"], ok


def _no_map(cfg, out):
    sec = "no-map"
    k = cfg.get_float(sec, "k", 0.2, 0.0, 0.25)
    f = profile_from_source(cfg.get_str(sec, "profile", "cone"), k)
    xs = cfg.get_floats(sec, "sources", [-0.5, -0.45, -0.4, -0.35])
    v = no_map_demo(f, xs, cfg.get_float(sec, "target_x", 0.5), cfg.get_float(sec, "height", 0.01),
                    cfg.get_int(sec, "targets", 8, 1))
    return v.to_dict(), ["no-optimal-map"], v.no_map


def _dimension(cfg, out):
    sec = "dimension"
    f = profile_from_source(cfg.get_str(sec, "profile", "ramp-smoothed"), cfg.k)
    eps = cfg.get_floats(sec, "eps_list", DEFAULT_EPS)
    est = {r: box_dimension(f, r, eps) for r in ("left", "right", "square")}
    for r, e in est.items():
        e.to_csv(out.path(f"boxes_{r}.csv"))
    ok = (abs(est["left"].slope - 1.0) <= 0.15 and abs(est["right"].slope - 2.0) <= 0.3
          and abs(est["square"].slope - 2.0) <= 0.1)
    return {r: e.to_dict() for r, e in est.items()}, ["non-constant-dimension"], ok


def _strict(cfg, out):
    sec = "strict"
    k = cfg.k
    sp = SpaceParams(preset("ramp-smoothed", k), k, cfg.K, singular=True)
    g = build_grid(sp, cfg.get_int(sec, "nx", 64, 2), cfg.get_int(sec, "nu", 16, 2))
    lo0, hi0 = cfg.get_floats(sec, "mu0", [-0.375, -0.125])
    lo1, hi1 = cfg.get_floats(sec, "mu1", [0.625, 0.875])
    fam = structured_family(block_measure(g, lo0, hi0), block_measure(g, lo1, hi1))
    rep = strict_cd_restriction_search(g, fam, N_list=(cfg.nprime, 2.0 * cfg.nprime),
                                       tol=cfg.get_float(sec, "tol", 1e-8, 0.0))
    # evidence only: both outcomes are a completed run
    return rep.to_dict(), ["strict-cd-failure"], True


COUNTEREXAMPLES = {"branching": _branching, "no-map": _no_map, "dimension": _dimension, "strict": _strict}


def cmd_counterexample(cfg, out, kind):
    return COUNTEREXAMPLES[kind](cfg, out)


def cmd_mgh(cfg, out):
    sec = "mgh"
    k = cfg.get_float(sec, "k", 0.2, 0.0, 0.25)
    f = profile_from_source(cfg.get_str(sec, "profile", "ramp-smoothed"), k)
    tr = mgh_harness(f, cfg.get_floats(sec, "eps_list", DEFAULT_EPS), k, cfg.K,
                     cfg.get_int(sec, "nx", 256, 2), cfg.get_int(sec, "nu", 4, 2))
    tr.to_csv(out.path("mgh.csv"))
    ok = tr.hausdorff_ok and tr.w1_decreasing and abs(tr.limit) < 1e-3
    return tr.to_dict(), ["mgh-approximation"], ok


# entry point ----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="cdspaces", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int)
    common.add_argument("--nx", type=int)
    common.add_argument("--nu", type=int)
    common.add_argument("--k", type=float)
    common.add_argument("--K", type=float)
    common.add_argument("--nprime", type=float)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate-profile", parents=[common])
    sub.add_parser("verify-cd", parents=[common])
    sub.add_parser("convexity", parents=[common])
    ce = sub.add_parser("counterexample", parents=[common])
    ce.add_argument("kind", choices=sorted(COUNTEREXAMPLES))
    sub.add_parser("mgh", parents=[common])
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {name: getattr(args, name) for name in ("seed", "nx", "nu", "k", "K", "nprime", "out")
                 if getattr(args, name) is not None}
    return validate(replace(cfg, **overrides))


def run(args):
    cfg = resolve_config(args)
    out = Outputs()
    t0 = time.perf_counter()
    try:
        if args.command == "validate-profile":
            verdicts, statements, ok = cmd_validate_profile(cfg, out)
        elif args.command == "verify-cd":
            verdicts, statements, ok = cmd_verify_cd(cfg, out)
        elif args.command == "convexity":
            verdicts, statements, ok = cmd_convexity(cfg, out)
        elif args.command == "counterexample":
            verdicts, statements, ok = cmd_counterexample(cfg, out, args.kind)
        else:
            verdicts, statements, ok = cmd_mgh(cfg, out)
        command = args.command + (f" {args.kind}" if args.command == "counterexample" else "")
        report = {
            "schema": SCHEMA, "command": command, "config": cfg.echo(), "statements": statements,
            "verdicts": verdicts, "passed": bool(ok),
            "artifacts": sorted(out.names + ["report.json", "meta.json"]),
        }
        with open(out.path("report.json"), "w", encoding="utf-8") as fh:
            json.dump(_clean(report), fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(out.path("meta.json"), "w", encoding="utf-8") as fh:
            json.dump({"wall_time_s": time.perf_counter() - t0, "version": __version__}, fh, sort_keys=True)
            fh.write("\n")
        out.commit(cfg.out or os.path.join("cdspaces-out", command.replace(" ", "-")))
    except BaseException:
        out.discard()
        raise
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
