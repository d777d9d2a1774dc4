"""l-infinity geometry of X_f: distance, pair classes, midpoint selection, geodesics.

Pair classes for ((x0, y0), (x1, y1)) with dx = |x0 - x1|, dy = |y0 - y1|:

    V   dx < dy
    D   dx == dy
    H0  dx / 2 >= dy
    H1  dx > dy > dx / 2

The midpoint map is Euclidean on V and D, fiber-proportional on H0 and uses
the corrected vertical offset ``ytilde`` on H1. Points where f vanishes have a
collapsed fiber; for H0 pairs such a point takes the fiber coordinate of the
other endpoint, which is what dyadic refinement of fiber-proportional
midpoints converges to as the fiber shrinks.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

MEMBERSHIP_SLACK = 1e-12
MAX_DEPTH = 12


class Point2(NamedTuple):
    x: float
    y: float


class PairClass(str, Enum):
    V = "V"
    D = "D"
    H0 = "H0"
    H1 = "H1"


CLASS_CODES = (PairClass.V, PairClass.D, PairClass.H0, PairClass.H1)


class MidpointError(ValueError):
    """The selected point is not a midpoint within tolerance, or leaves X_f."""


class SingularRegionError(ZeroDivisionError):
    """A formula that divides by f was used where f vanishes."""


def dist_inf(p, q):
    return max(abs(q[0] - p[0]), abs(q[1] - p[1]))


def dist_inf_arrays(x0, y0, x1, y1):
    return np.maximum(np.abs(np.asarray(x1) - x0), np.abs(np.asarray(y1) - y0))


def classify_codes(dx, dy):
    """Vectorized class codes (indices into ``CLASS_CODES``) from |dx|, |dy|."""
    dx = np.abs(np.asarray(dx, dtype=float))
    dy = np.abs(np.asarray(dy, dtype=float))
    codes = np.full(np.broadcast(dx, dy).shape, 3, dtype=np.int8)
    codes[0.5 * dx >= dy] = 2
    codes[dx == dy] = 1
    codes[dx < dy] = 0
    return codes


def classify_pair(p, q) -> PairClass:
    return CLASS_CODES[int(classify_codes(q[0] - p[0], q[1] - p[1]))]


def ytilde(x0, x1, y0, f):
    """Vertical offset of the H1 midpoint for an ascending pair (x0 < x1).

    Equals (x1 - x0)/4 when f is constant.
    """
    f0 = f(x0)
    f1 = f(x1)
    if np.any(np.asarray(f0) == 0.0) or np.any(np.asarray(f1) == 0.0):
        raise SingularRegionError("ytilde needs f > 0 at both endpoints")
    half = 0.5 * (np.asarray(x1) - x0)
    return 0.5 * (y0 / f0 + (y0 + half) / f1) * f(0.5 * (np.asarray(x0) + x1)) - y0


def _h1_ascending(x0, y0, x1, y1, f):
    d = x1 - x0
    yt = ytilde(x0, x1, y0, f)
    return 0.5 * (x0 + x1), y0 + yt + (0.5 * d - yt) * (2.0 * (y1 - y0) / d - 1.0)


def _reflected(f):
    return lambda x: f(-np.asarray(x))


def _h1_midpoint(x0, y0, x1, y1, f):
    xm = np.empty_like(x0)
    ym = np.empty_like(x0)
    up = y0 < y1
    right = x0 < x1
    fr = _reflected(f)

    sel = right & up
    if sel.any():
        xm[sel], ym[sel] = _h1_ascending(x0[sel], y0[sel], x1[sel], y1[sel], f)
    sel = ~right & ~up
    if sel.any():
        xm[sel], ym[sel] = _h1_ascending(x1[sel], y1[sel], x0[sel], y0[sel], f)
    sel = right & ~up
    if sel.any():
        a, b = _h1_ascending(-x1[sel], y1[sel], -x0[sel], y0[sel], fr)
        xm[sel], ym[sel] = -a, b
    sel = ~right & up
    if sel.any():
        a, b = _h1_ascending(-x0[sel], y0[sel], -x1[sel], y1[sel], fr)
        xm[sel], ym[sel] = -a, b
    return xm, ym


def _fiber_coords(y0, f0, y1, f1):
    with np.errstate(divide="ignore", invalid="ignore"):
        u0 = np.where(f0 > 0.0, y0 / np.where(f0 > 0.0, f0, 1.0), np.nan)
        u1 = np.where(f1 > 0.0, y1 / np.where(f1 > 0.0, f1, 1.0), np.nan)
    u0 = np.where(np.isnan(u0), np.where(np.isnan(u1), 0.0, u1), u0)
    u1 = np.where(np.isnan(u1), u0, u1)
    return u0, u1


def midpoint_arrays(x0, y0, x1, y1, f, k=None, check=True):
    """Vectorized midpoint selection. Returns ``(xm, ym, codes)``.

    With ``check`` and a value for ``k``, the midpoint property is audited
    at tolerance ``10 k d(p, q)`` and membership in X_f at 1e-12.
    """
    x0, y0, x1, y1 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x0, y0, x1, y1)))
    shape = x0.shape
    x0, y0, x1, y1 = (v.ravel().copy() for v in (x0, y0, x1, y1))
    codes = classify_codes(x1 - x0, y1 - y0)
    xm = 0.5 * (x0 + x1)
    ym = 0.5 * (y0 + y1)

    h0 = codes == 2
    if h0.any():
        f0 = np.atleast_1d(f(x0[h0]))
        f1 = np.atleast_1d(f(x1[h0]))
        u0, u1 = _fiber_coords(y0[h0], f0, y1[h0], f1)
        ym[h0] = 0.5 * (u0 + u1) * np.atleast_1d(f(xm[h0]))
    h1 = codes == 3
    if h1.any():
        xm[h1], ym[h1] = _h1_midpoint(x0[h1], y0[h1], x1[h1], y1[h1], f)

    if check and k is not None:
        d = dist_inf_arrays(x0, y0, x1, y1)
        tol = 10.0 * k * d + 1e-15
        e0 = np.abs(dist_inf_arrays(xm, ym, x0, y0) - 0.5 * d)
        e1 = np.abs(dist_inf_arrays(xm, ym, x1, y1) - 0.5 * d)
        bad = (e0 > tol) | (e1 > tol)
        if bad.any():
            i = int(np.argmax(bad))
            raise MidpointError(
                f"midpoint property violated for pair ({x0[i]}, {y0[i]}), ({x1[i]}, {y1[i]}): "
                f"errors {e0[i]:.3e}, {e1[i]:.3e} > {tol[i]:.3e}"
            )
        fm = np.atleast_1d(f(xm))
        out = (ym < -MEMBERSHIP_SLACK) | (ym > fm + MEMBERSHIP_SLACK)
        if out.any():
            i = int(np.argmax(out))
            raise MidpointError(f"midpoint ({xm[i]}, {ym[i]}) leaves X_f (f = {fm[i]})")
    return xm.reshape(shape), ym.reshape(shape), codes.reshape(shape)


def in_space(p, f, x_range=(-1.0, 1.0)):
    x, y = p
    if not (x_range[0] - MEMBERSHIP_SLACK <= x <= x_range[1] + MEMBERSHIP_SLACK):
        return False
    return -MEMBERSHIP_SLACK <= y <= float(f(x)) + MEMBERSHIP_SLACK


def midpoint(p, q, f, k=None, x_range=(-1.0, 1.0)) -> Point2:
    """Midpoint of ``p`` and ``q`` in X_f under the selection described above."""
    for pt in (p, q):
        if not in_space(pt, f, x_range):
            raise MidpointError(f"point {tuple(pt)} is not in the space")
    xm, ym, _ = midpoint_arrays(p[0], p[1], q[0], q[1], f, k=k, check=k is not None)
    return Point2(float(xm), float(ym))


@dataclass
class SampledCurve:
    """A curve stored at dyadic times ``j / 2**depth``."""

    times: np.ndarray
    points: np.ndarray  # (T, 2)

    def at(self, t):
        idx = int(np.searchsorted(self.times, t))
        if idx >= self.times.size or not np.isclose(self.times[idx], t, atol=1e-15):
            raise KeyError(f"time {t} is not stored")
        return Point2(*self.points[idx])

    def speed_defect(self):
        """Max deviation from d(g(s), g(t)) = |s - t| d(g(0), g(1)).

        Checked against both endpoints and between consecutive samples, which
        together pin down all pairs by the triangle inequality.
        """
        P = self.points
        L = dist_inf(P[0], P[-1])
        t = self.times
        e0 = np.abs(dist_inf_arrays(P[0, 0], P[0, 1], P[:, 0], P[:, 1]) - t * L)
        e1 = np.abs(dist_inf_arrays(P[-1, 0], P[-1, 1], P[:, 0], P[:, 1]) - (1.0 - t) * L)
        step = dist_inf_arrays(P[:-1, 0], P[:-1, 1], P[1:, 0], P[1:, 1])
        e2 = np.abs(step - np.diff(t) * L) if P.shape[0] > 1 else np.zeros(1)
        return float(max(e0.max(), e1.max(), e2.max()))

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.times, self.points]), delimiter=",",
                   header="t,x,y", comments="", fmt="%.17g")


def _refine_points(x0, y0, x1, y1, f, depth, k=None):
    """Dyadic refinement for many curves at once; arrays of shape (C,)."""
    n = 2 ** depth + 1
    C = np.asarray(x0).size
    X = np.empty((C, n))
    Y = np.empty((C, n))
    X[:, 0], Y[:, 0] = x0, y0
    X[:, -1], Y[:, -1] = x1, y1
    step = n - 1
    while step > 1:
        half = step // 2
        a = np.arange(0, n - 1, step)
        b = a + step
        xm, ym, _ = midpoint_arrays(X[:, a], Y[:, a], X[:, b], Y[:, b], f, k=k, check=k is not None)
        X[:, a + half] = xm
        Y[:, a + half] = ym
        step = half
    return X, Y


def geodesic_refine(p, q, f, depth=8, k=None, check_speed=True) -> SampledCurve:
    """Constant-speed curve from ``p`` to ``q`` by recursive midpoint selection.

    Raises ``MidpointError`` if the stored samples drift from constant speed
    by more than ``10 k`` (requires ``k``).
    """
    if not (0 <= depth <= MAX_DEPTH):
        raise ValueError(f"depth must be in [0, {MAX_DEPTH}]")
    X, Y = _refine_points(np.array([p[0]]), np.array([p[1]]), np.array([q[0]]), np.array([q[1]]), f, depth, k)
    times = np.linspace(0.0, 1.0, 2 ** depth + 1)
    curve = SampledCurve(times, np.column_stack([X[0], Y[0]]))
    if check_speed and k is not None:
        defect = curve.speed_defect()
        if defect > 10.0 * k:
            raise MidpointError(f"constant-speed defect {defect:.3e} exceeds 10k = {10 * k:.3e}")
    return curve


@dataclass
class GeodesicFamily:
    """Weighted family of sampled geodesics; evaluation at time t is a sample lookup."""

    times: np.ndarray
    curves: np.ndarray  # (C, T, 2)
    weights: np.ndarray  # (C,)
    source_index: Optional[np.ndarray] = None
    target_index: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.curves.shape[0] != self.weights.size:
            raise ValueError("one weight per curve")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights must sum to 1, got {self.weights.sum()}")

    def time_index(self, t):
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-12:
            raise KeyError(f"time {t} is not stored")
        return idx

    def evaluate(self, t):
        """Positions (C, 2) of all curves at dyadic time ``t``."""
        return self.curves[:, self.time_index(t), :]

    def restricted(self, weight):
        """Family reweighted by a nonnegative function on curves, renormalized."""
        w = self.weights * np.asarray(weight, dtype=float)
        total = w.sum()
        if total <= 0.0:
            raise ValueError("restriction has zero mass")
        keep = w > 0.0
        return GeodesicFamily(
            self.times, self.curves[keep], w[keep] / total,
            None if self.source_index is None else self.source_index[keep],
            None if self.target_index is None else self.target_index[keep],
        )


def build_family(starts, ends, weights, f, depth=8, k=None, source_index=None, target_index=None):
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    X, Y = _refine_points(starts[:, 0], starts[:, 1], ends[:, 0], ends[:, 1], f, depth, k)
    times = np.linspace(0.0, 1.0, 2 ** depth + 1)
    w = np.asarray(weights, dtype=float)
    return GeodesicFamily(times, np.stack([X, Y], axis=-1), w / w.sum(), source_index, target_index)


@dataclass
class BranchingWitness:
    p: Point2
    q1: Point2
    q2: Point2
    t_star: float
    x_star: float
    curve1: SampledCurve
    curve2: SampledCurve
    agreement_error: float
    separation: float

    def to_dict(self):
        return {
            "p": list(self.p), "q1": list(self.q1), "q2": list(self.q2),
            "t_star": self.t_star, "x_star": self.x_star,
            "agreement_error": self.agreement_error, "separation": self.separation,
        }


def zero_set_edge(f, x_from, x_to, samples=4097, iters=80):
    """Furthest x from ``x_from`` toward ``x_to`` such that f == 0 on the traversed interval."""
    xs = np.linspace(x_from, x_to, samples)
    zero = np.asarray(f(xs)) == 0.0
    if not zero[0]:
        raise ValueError("f does not vanish at the starting point")
    if zero.all():
        return float(x_to)
    j = int(np.argmin(zero))
    lo, hi = xs[j - 1], xs[j]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) == 0.0:
            lo = mid
        else:
            hi = mid
    return float(lo)


def forced_segment_witness(p, q1, q2, f, depth=8, k=None) -> BranchingWitness:
    """Two geodesics from a collapsed-fiber point that share an initial segment.

    Any geodesic from ``p`` to ``qi`` has horizontal speed equal to the
    distance (the pair is in H), so x(t) is affine; while x(t) stays in the
    zero set of f the constraint 0 <= y <= f(x) forces y(t) = 0. Both curves
    therefore coincide up to ``t_star`` and end at different points.
    """
    p, q1, q2 = Point2(*map(float, p)), Point2(*map(float, q1)), Point2(*map(float, q2))
    if f(p.x) != 0.0 or p.y != 0.0:
        raise ValueError("p must lie on the one-dimensional part (f(p.x) = 0, y = 0)")
    if q1 == q2:
        raise ValueError("q1 and q2 coincide: no branching")
    if q1.x != q2.x:
        raise ValueError("q1 and q2 must share the same x-coordinate")
    for q in (q1, q2):
        if abs(q.x - p.x) <= abs(q.y - p.y):
            raise ValueError(f"pair ({p}, {q}) is not in H")
        if not (0.0 <= q.y <= f(q.x) + MEMBERSHIP_SLACK):
            raise ValueError(f"{q} is not in the space")
    x_star = zero_set_edge(f, p.x, q1.x)
    L = abs(q1.x - p.x)
    t_star = abs(x_star - p.x) / L
    c1 = geodesic_refine(p, q1, f, depth, k)
    c2 = geodesic_refine(p, q2, f, depth, k)
    early = c1.times <= t_star + 1e-15
    agree = float(np.abs(c1.points[early] - c2.points[early]).max())
    ground = float(max(np.abs(c1.points[early, 1]).max(), np.abs(c2.points[early, 1]).max()))
    return BranchingWitness(
        p, q1, q2, t_star, x_star, c1, c2,
        agreement_error=max(agree, ground),
        separation=float(dist_inf(c1.points[-1], c2.points[-1])),
    )
