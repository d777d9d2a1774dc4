"""Measured Gromov-Hausdorff approximation of a collapsed space by f + eps.

For f in the closure class and eps > 0, X_{f+eps} contains X_f and every
point of X_{f+eps} lies within eps of X_f (lower it vertically), so the
Hausdorff distance is at most eps. In (x, u) coordinates both reference
measures have the same cell masses; the vertical coupling moves an atom at
fiber height u by u * eps, and y is a 1-Lipschitz potential, so

    W1 = eps * sum_j u_j I_j / C_K

exactly for the discretized measures.
"""

from dataclasses import dataclass, field

import numpy as np

from ..measure import DiscreteMeasure, SpaceParams, build_grid
from ..profiles import F_K, ProfileFn, validate_membership
from ..transport import solve_discrete_ot


@dataclass
class MghTrace:
    epsilons: list
    hausdorff: list
    w1: list
    w1_exact: list
    limit: float  # intercept of the least-squares line of W1 against eps
    nx: int
    nu: int
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.epsilons)
        if not (len(self.hausdorff) == len(self.w1) == n):
            raise ValueError("trace lists must be aligned")
        if np.any(np.diff(self.epsilons) >= 0):
            raise ValueError("epsilons must be strictly decreasing")

    @property
    def hausdorff_ok(self):
        return all(h <= e for h, e in zip(self.hausdorff, self.epsilons))

    @property
    def w1_decreasing(self):
        return bool(np.all(np.diff(self.w1) < 0))

    def to_dict(self):
        return {
            "epsilons": self.epsilons, "hausdorff": self.hausdorff, "w1": self.w1,
            "w1_exact": self.w1_exact, "limit": self.limit, "nx": self.nx, "nu": self.nu,
            "atoms": self.atoms, "hausdorff_ok": self.hausdorff_ok,
            "w1_decreasing": self.w1_decreasing,
        }

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.epsilons, self.hausdorff, self.w1, self.w1_exact]),
                   delimiter=",", header="eps,hausdorff,w1,w1_exact", comments="", fmt="%.17g")


def hausdorff_vertical(f, eps, x_range=(-1.0, 1.0), samples=8193):
    """d_inf Hausdorff distance between X_{f+eps} and X_f.

    X_f is contained in X_{f+eps}, and the distance from (x, y) to X_f grows
    with y, so only the top boundary matters: the distance of (x, f(x) + eps)
    is min over x' of max(|x - x'|, f(x) + eps - f(x')), taken over sampled
    x' within eps of x.
    """
    xs = np.linspace(*x_range, samples)
    fx = np.asarray(f(xs), dtype=float)
    h = xs[1] - xs[0]
    w = int(np.ceil(eps / h))
    best = np.full(xs.size, eps)
    for o in range(-w, w + 1):
        j = np.clip(np.arange(xs.size) + o, 0, xs.size - 1)
        d = np.maximum(np.abs(xs - xs[j]), np.maximum(fx + eps - fx[j], 0.0))
        best = np.minimum(best, d)
    return float(best.max())


def _atoms(params: SpaceParams, nx, nu):
    g = build_grid(params, nx, nu)
    mu = DiscreteMeasure.from_mass(g, g.w)
    return g, mu


def vertical_w1(grid_eps):
    """Closed-form W1 of the vertical coupling, per unit eps."""
    g = grid_eps
    return float(np.sum(g.w * g.u) / np.sum(g.w))


def mgh_harness(f: ProfileFn, eps_list, k, K=16.0, nx=256, nu=4, check_class=True) -> MghTrace:
    """Hausdorff and W1 distances between X_{f+eps} and the collapsed X_f.

    Raises ``ValueError`` if some f + eps is not in F_k.
    """
    eps_list = [float(e) for e in eps_list]
    if check_class:
        for e in eps_list:
            rep = validate_membership(f.shifted(e), k)
            if rep.cls != F_K:
                raise ValueError(f"f + {e:g} is not in F_k ({rep.violated_bound} at x = {rep.where})")
    base = SpaceParams(f, k, K, singular=True)
    g0, mu0 = _atoms(base, nx, nu)
    H, W, Wx, atoms = [], [], [], []
    for e in eps_list:
        fe = f.shifted(e)
        ge, mue = _atoms(SpaceParams(fe, k, K), nx, nu)
        H.append(hausdorff_vertical(f, e))
        plan = solve_discrete_ot(mue, mu0, cost="lin")
        W.append(float(plan.cost))
        Wx.append(e * vertical_w1(ge))
        atoms.append([int(mue.support.size), int(mu0.support.size)])
    slope, intercept = np.polyfit(eps_list, W, 1)
    return MghTrace(eps_list, H, W, Wx, float(intercept), nx, nu, atoms)
