"""(K, N)-convexity certificates for sampled functions of one variable.

A C^2 function g is (K, N)-convex when g'' >= K + (g')^2 / N. Certificates
report the minimum slack of that inequality over the samples. Derivatives are
taken from analytic arrays when provided and from centered differences
otherwise.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import ytilde

BUMP_DELTA_MAX = 2.0 ** -11
BUMP_K_SCALE = 2.0 ** 21
H_ZERO_CUT = 1e-3


@dataclass
class SampledFunction:
    ts: np.ndarray
    gs: np.ndarray
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None
    fn: Optional[Callable] = field(default=None, repr=False)  # t -> (g, g', g'') for resampling

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        self.gs = np.asarray(self.gs, dtype=float)
        if self.ts.size < 5:
            raise ValueError("need at least 5 samples")
        if self.ts.shape != self.gs.shape:
            raise ValueError("ts and gs must have the same shape")
        if np.any(np.diff(self.ts) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if (self.d1 is None) != (self.d2 is None):
            raise ValueError("provide both analytic derivatives or neither")
        if self.d1 is None:
            h = np.diff(self.ts)
            if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
                raise ValueError("finite differences need uniform spacing")
        else:
            self.d1 = np.asarray(self.d1, dtype=float)
            self.d2 = np.asarray(self.d2, dtype=float)

    @classmethod
    def from_callable(cls, fn, t0, t1, n=2001):
        """Sample ``fn(t) -> (g, g', g'')`` on a uniform grid of [t0, t1]."""
        ts = np.linspace(t0, t1, n)
        g, d1, d2 = fn(ts)
        return cls(ts, g, d1, d2, fn)

    @property
    def analytic(self):
        return self.d1 is not None

    @property
    def spacing(self):
        return float(self.ts[1] - self.ts[0])

    def derivatives(self):
        """(index, g', g'') on the samples where both are available."""
        if self.analytic:
            return np.arange(self.ts.size), self.d1, self.d2
        h = self.spacing
        g = self.gs
        d1 = (g[2:] - g[:-2]) / (2.0 * h)
        d2 = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / (h * h)
        return np.arange(1, g.size - 1), d1, d2

    def default_tol(self):
        if self.analytic:
            return 1e-6
        return 1e-6 + 100.0 * self.spacing ** 2 * float(np.max(np.abs(self.gs)))

    def __add__(self, other):
        if self.ts.shape != other.ts.shape or not np.array_equal(self.ts, other.ts):
            raise ValueError("sample grids differ")
        if self.analytic and other.analytic:
            return SampledFunction(self.ts, self.gs + other.gs, self.d1 + other.d1, self.d2 + other.d2)
        return SampledFunction(self.ts, self.gs + other.gs)


@dataclass
class ConvexityCertificate:
    K: float
    N: float
    min_slack: float
    argmin: int
    argmin_t: float
    tol: float
    passed: bool

    def to_dict(self):
        return {"K": self.K, "N": self.N, "min_slack": self.min_slack,
                "argmin_t": self.argmin_t, "tol": self.tol, "passed": self.passed}


def kn_slack(d1, d2, K, N):
    if np.isinf(N):
        return d2 - K
    return d2 - K - d1 * d1 / N


def kn_certificate(g: SampledFunction, K: float, N: float, tol: Optional[float] = None) -> ConvexityCertificate:
    """Minimum over samples of g'' - K - (g')^2 / N."""
    if N <= 0:
        raise ValueError("N must be positive")
    tol = g.default_tol() if tol is None else tol
    idx, d1, d2 = g.derivatives()
    slack = kn_slack(d1, d2, K, N)
    a = int(np.argmin(slack))
    ms = float(slack[a])
    return ConvexityCertificate(float(K), float(N), ms, int(idx[a]), float(g.ts[idx[a]]), float(tol), ms >= -tol)


@dataclass
class CharacterizationReport:
    kn: ConvexityCertificate
    gN_min_slack: float
    gN_passed: bool
    agree: bool

    def to_dict(self):
        return {"kn": self.kn.to_dict(), "gN_min_slack": self.gN_min_slack,
                "gN_passed": self.gN_passed, "agree": self.agree}


def gN_characterization_check(g: SampledFunction, K: float, N: float, tol: Optional[float] = None):
    """Check g_N'' <= -(K/N) g_N for g_N = exp(-g/N) and compare with the direct certificate.

    The slack -(K/N) g_N - g_N'' is divided by g_N / N so both tests share a
    tolerance scale.
    """
    cert = kn_certificate(g, K, N, tol)
    gN = np.exp(-(g.gs - g.gs.min()) / N)  # common factor cancels in the normalized slack
    if g.analytic:
        idx = np.arange(g.ts.size)
        gNpp = gN * (g.d1 ** 2 / N ** 2 - g.d2 / N)
    else:
        h = g.spacing
        idx = np.arange(1, g.ts.size - 1)
        gNpp = (gN[2:] - 2.0 * gN[1:-1] + gN[:-2]) / (h * h)
    slack = (-(K / N) * gN[idx] - gNpp) * N / gN[idx]
    ms = float(slack.min())
    passed = ms >= -cert.tol
    return CharacterizationReport(cert, ms, passed, passed == cert.passed)


@dataclass
class ReparamReport:
    original: ConvexityCertificate
    reparametrized: ConvexityCertificate
    agree: bool

    def to_dict(self):
        return {"original": self.original.to_dict(), "reparametrized": self.reparametrized.to_dict(),
                "agree": self.agree}


class DomainError(ValueError):
    pass


def reparametrize_check(g: SampledFunction, alpha, beta, K, N, t_range=None, tol=None, n=None):
    """Certify g at (K, N) and t -> g(alpha + beta t) at (beta^2 K, N).

    With ``t_range`` the reparametrized function is resampled on that range
    through ``g.fn``; otherwise the samples of g are reused at the preimage
    times.
    """
    if beta == 0:
        raise ValueError("beta must be nonzero")
    orig = kn_certificate(g, K, N, tol)
    if t_range is None:
        ts = (g.ts - alpha) / beta
        order = np.argsort(ts)
        if g.analytic:
            rep = SampledFunction(ts[order], g.gs[order], beta * g.d1[order], beta ** 2 * g.d2[order])
        else:
            rep = SampledFunction(ts[order], g.gs[order])
    else:
        if g.fn is None:
            raise ValueError("resampling needs a callable-backed function")
        t0, t1 = t_range
        s = np.array([alpha + beta * t0, alpha + beta * t1])
        lo, hi = g.ts[0], g.ts[-1]
        if s.min() < lo - 1e-12 or s.max() > hi + 1e-12:
            raise DomainError(f"alpha + beta t leaves the domain [{lo}, {hi}]")
        fn = g.fn

        def rfn(t):
            v, d1, d2 = fn(alpha + beta * np.asarray(t))
            return v, beta * d1, beta * beta * d2

        rep = SampledFunction.from_callable(rfn, t0, t1, n or g.ts.size)
    rcert = kn_certificate(rep, beta * beta * K, N, tol)
    return ReparamReport(orig, rcert, orig.passed == rcert.passed)


@dataclass
class AdditivityReport:
    first: ConvexityCertificate
    second: ConvexityCertificate
    total: ConvexityCertificate
    consistent: bool  # inputs pass => sum passes

    def to_dict(self):
        return {"first": self.first.to_dict(), "second": self.second.to_dict(),
                "sum": self.total.to_dict(), "consistent": self.consistent}


def additivity_check(g, h, K1, N1, K2, N2, tol=None):
    c1 = kn_certificate(g, K1, N1, tol)
    c2 = kn_certificate(h, K2, N2, tol)
    s = g + h  # raises on mismatched grids
    cs = kn_certificate(s, K1 + K2, N1 + N2, tol)
    return AdditivityReport(c1, c2, cs, (not (c1.passed and c2.passed)) or cs.passed)


def _smoothstep(u):
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_d1(u):
    return 30.0 * u * u * (1.0 - u) ** 2


def _smoothstep_d2(u):
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)


def phi_bump(t, derivative=0):
    """C^2 bump: 0 on [0, 1/4] and [3/4, 1], equal to 1 at 1/2.

    Built from the quintic smoothstep on [1/4, 1/2] and its mirror image.
    """
    t = np.asarray(t, dtype=float)
    left = np.clip(4.0 * (t - 0.25), 0.0, 1.0)
    right = np.clip(4.0 * (0.75 - t), 0.0, 1.0)
    rising = t <= 0.5
    u = np.where(rising, left, right)
    sign = np.where(rising, 4.0, -4.0)
    inside = (u > 0.0) & (u < 1.0)
    if derivative == 0:
        return _smoothstep(u)
    if derivative == 1:
        return np.where(inside, sign * _smoothstep_d1(u), 0.0)
    if derivative == 2:
        return np.where(inside, 16.0 * _smoothstep_d2(u), 0.0)
    raise ValueError("derivative must be 0, 1 or 2")


def audit_phi(n=4096):
    """Max |phi'| and |phi''| on a grid; raises if the bounds 16 and 128 fail."""
    ts = np.linspace(0.0, 1.0, n)
    m1 = float(np.abs(phi_bump(ts, 1)).max())
    m2 = float(np.abs(phi_bump(ts, 2)).max())
    if m1 > 16.0 or m2 > 128.0:
        raise AssertionError(f"bump derivative bounds violated: {m1}, {m2}")
    return m1, m2


PHI_BOUNDS = audit_phi()


def h_parts(A, delta, t):
    t = np.asarray(t, dtype=float)
    c = A - 1.0
    # (1 - t) + t A keeps h(1) = A exact even for tiny A
    h = (1.0 - t) + t * A + delta * phi_bump(t) * c
    h1 = c * (1.0 + delta * phi_bump(t, 1))
    h2 = delta * phi_bump(t, 2) * c
    return h, h1, h2


def build_h(A: float, delta: float, samples: int = 2001) -> SampledFunction:
    """h(t) = 1 + t (A - 1) + delta phi(t) (A - 1) sampled on [0, 1].

    Returned as a sampled ``h`` with analytic derivatives. When A = 0 the
    samples stop at 1 - 1e-3, since h(1) = 0; the same cut applies for
    A < 1e-3, where -log h overflows near t = 1.
    """
    if A < 0:
        raise ValueError("A must be nonnegative")
    if not abs(delta) < BUMP_DELTA_MAX:
        raise ValueError(f"|delta| must be below 2^-11, got {delta}")
    t1 = 1.0 - 1e-3 if A < H_ZERO_CUT else 1.0
    fn = lambda t: h_parts(A, delta, t)
    return SampledFunction.from_callable(fn, 0.0, t1, samples)


def neg_log(s: SampledFunction) -> SampledFunction:
    """-log of a positive sampled function, with analytic derivatives carried over."""
    if np.any(s.gs <= 0):
        raise ValueError("function must be positive")
    g = -np.log(s.gs)
    if s.analytic:
        return SampledFunction(s.ts, g, -s.d1 / s.gs, (s.d1 / s.gs) ** 2 - s.d2 / s.gs)
    return SampledFunction(s.ts, g)


def h_certificate(A, delta, samples=2001, tol=1e-6):
    """Certificate of -log h at (-2^21 delta^2, 2)."""
    return kn_certificate(neg_log(build_h(A, delta, samples)), -BUMP_K_SCALE * delta * delta, 2.0, tol)


def neglog_m_along(f, K, X, X1, Y, Y1, Y2):
    """-log m(X(t), Y(t)) and its first two t-derivatives for affine X.

    ``X1`` is dX/dt (constant); ``Y1, Y2`` are dY/dt and d2Y/dt2.
    Uses -log m = log f(X) + K u^2 with u = Y / f(X).
    """
    F = np.asarray(f.eval(X), dtype=float)
    F1 = np.asarray(f.eval_d1(X), dtype=float)
    F2 = np.asarray(f.eval_d2(X), dtype=float)
    u = Y / F
    lf1 = F1 * X1 / F
    lf2 = F2 * X1 * X1 / F - lf1 * lf1
    u1 = Y1 / F - u * lf1
    # d/dt (F1 X1 / F) = lf2; u'' = Y2/F - (Y1/F) lf1 - u1 lf1 - u lf2
    u2 = Y2 / F - (Y1 / F) * lf1 - u1 * lf1 - u * lf2
    g = np.log(F) + K * u * u
    g1 = lf1 + 2.0 * K * u * u1
    g2 = lf2 + 2.0 * K * (u1 * u1 + u * u2)
    return g, g1, g2


@dataclass
class LineCheckResult:
    certificate: ConvexityCertificate
    f_I: float
    precondition_ok: bool
    violation: Optional[str] = None

    def to_dict(self):
        return {"certificate": self.certificate.to_dict(), "f_I": self.f_I,
                "precondition_ok": self.precondition_ok, "violation": self.violation}


class PreconditionError(ValueError):
    pass


def line_profile_check(params, y: SampledFunction, H: float = 8.0, tol: float = 1e-6) -> LineCheckResult:
    """Certify x -> -log m(x, y(x)) at (K / (32 f_I^2), 32 K).

    ``y`` must carry analytic y' and y''. Preconditions: y' >= 1/4,
    |y''| <= H k / f and 0 <= y <= f at every sample.
    """
    if not y.analytic:
        raise ValueError("line profile needs analytic y' and y''")
    f, k, K = params.f, params.k, params.K
    x = y.ts
    fx = np.asarray(f.eval(x), dtype=float)
    checks = [
        ("y' >= 1/4", y.d1 < 0.25 - 1e-15),
        ("|y''| <= H k / f", np.abs(y.d2) > H * k / fx),
        ("0 <= y <= f", (y.gs < -1e-15) | (y.gs > fx * (1 + 1e-12))),
    ]
    for name, bad in checks:
        if bad.any():
            i = int(np.argmax(bad))
            raise PreconditionError(f"precondition {name} fails at x={x[i]!r}")
    f_I = float(fx.max())
    g, g1, g2 = neglog_m_along(f, K, x, 1.0, y.gs, y.d1, y.d2)
    cert = kn_certificate(SampledFunction(x, g, g1, g2), K / (32.0 * f_I ** 2), 32.0 * K, tol)
    return LineCheckResult(cert, f_I, True)


def affine_line(x0, x1, y0, slope, n=401):
    xs = np.linspace(x0, x1, n)
    return SampledFunction(xs, y0 + slope * (xs - x0), np.full(n, slope), np.zeros(n))


# case profiles ---------------------------------------------------------------

CASE_N = {"H0": lambda K: 2.0 * K + 2.0, "V": lambda K: 32.0 * K + 2.0, "D": lambda K: 32.0 * K + 2.0,
          "H1": lambda K: 32.0 * K + 3.0}


@dataclass
class CaseData:
    """Endpoint data of one transported point: (x, y) -> (T1, T2) with the map's partials."""

    x: float
    y: float
    T1: float
    T2: float
    dT1dx: float
    dT2dy: float


def _neglog_affine(t, a0, a1):
    L = a0 + t * (a1 - a0)
    if np.any(L <= 0):
        raise ValueError("interpolated Jacobian factor must stay positive")
    s = a1 - a0
    return -np.log(L), -s / L, (s / L) ** 2


def h1_excess(data: CaseData, f):
    """delta = -(ytilde - d/4) / (d/2) for an ascending H1 pair, d = T1 - x."""
    d = data.T1 - data.x
    yt = ytilde(data.x, data.T1, data.y, f)
    return -(yt - 0.25 * d) / (0.5 * d)


def h1_z_curve(data: CaseData, f):
    """Quadratic through (x, y), the selected midpoint, and (T1, T2).

    Returns the coefficients (c0, c1, c2) of z(s) = c0 + c1 (s - x) + c2 (s - x)^2.
    """
    from .geometry import midpoint_arrays

    xm, ym, _ = midpoint_arrays(data.x, data.y, data.T1, data.T2, f, check=False)
    d = data.T1 - data.x
    h = 0.5 * d
    s1 = (float(ym) - data.y) / h
    s2 = (data.T2 - float(ym)) / h
    c2 = (s2 - s1) / d
    c1 = s1 - c2 * h
    return data.y, c1, c2


def case_profile(case: str, data: CaseData, params, n: int = 2001) -> SampledFunction:
    """The t-profile whose (0, N)-convexity gives the pointwise CD inequality.

    ``case`` is ``"H0"``, ``"V"``, ``"D"`` (same profile as V) or ``"H1"``
    (ascending orientation x < T1, y < T2).
    """
    if data.dT1dx < 0 or data.dT2dy < 0:
        raise ValueError("map partials must be nonnegative")
    f, K = params.f, params.K
    t = np.linspace(0.0, 1.0, n)
    a, b = data.dT1dx, data.dT2dy
    fx, fT = float(f(data.x)), float(f(data.T1))
    if case == "H0":
        g1, d11, d21 = _neglog_affine(t, 1.0, a)
        g2, d12, d22 = _neglog_affine(t, 1.0 / fx, b / fT)
        u0, u1 = data.y / fx, data.T2 / fT
        U = u0 + t * (u1 - u0)
        g3 = K * U * U
        d13 = 2.0 * K * (u1 - u0) * U
        d23 = np.full_like(t, 2.0 * K * (u1 - u0) ** 2)
        return SampledFunction(t, g1 + g2 + g3, d11 + d12 + d13, d21 + d22 + d23)
    if case in ("V", "D"):
        g1, d11, d21 = _neglog_affine(t, 1.0, a)
        g2, d12, d22 = _neglog_affine(t, 1.0, b)
        X = data.x + t * (data.T1 - data.x)
        Y = data.y + t * (data.T2 - data.y)
        gm, dm1, dm2 = neglog_m_along(f, K, X, data.T1 - data.x, Y, data.T2 - data.y, 0.0)
        return SampledFunction(t, g1 + g2 + gm, d11 + d12 + dm1, d21 + d22 + dm2)
    if case == "H1":
        if not (data.x < data.T1 and data.y < data.T2):
            raise ValueError("H1 profile expects the ascending orientation; reflect the data first")
        g1, d11, d21 = _neglog_affine(t, 1.0, a)
        delta = h1_excess(data, f)
        h, h1, h2 = h_parts(b, delta, t)
        if np.any(h <= 0):
            raise ValueError("h must stay positive")
        gh, dh1, dh2 = -np.log(h), -h1 / h, (h1 / h) ** 2 - h2 / h
        c0, c1, c2 = h1_z_curve(data, f)
        d = data.T1 - data.x
        X = data.x + t * d
        s = X - data.x
        Y = c0 + c1 * s + c2 * s * s
        Y1 = (c1 + 2.0 * c2 * s) * d
        Y2 = np.full_like(t, 2.0 * c2 * d * d)
        gm, dm1, dm2 = neglog_m_along(f, K, X, d, Y, Y1, Y2)
        return SampledFunction(t, g1 + gh + gm, d11 + dh1 + dm1, d21 + dh2 + dm2)
    raise ValueError(f"unknown case {case!r}")


def case_certificate(case, data, params, N=None, tol=1e-6, n=2001):
    N = CASE_N[case](params.K) if N is None else N
    return kn_certificate(case_profile(case, data, params, n), 0.0, N, tol)


def f_interval_max(f, x0, x1, n=1001):
    xs = np.linspace(min(x0, x1), max(x0, x1), n)
    return float(np.max(f(xs)))


# random instances for property suites --------------------------------------


def random_kn_function(rng, t0=0.0, t1=1.0, n=401):
    """Random smooth g with the sharpest (K, N) it satisfies: returns (g, K, N).

    g(t) = a t^2 + b t + c exp(d t); N is drawn and K is the minimum of
    g'' - (g')^2 / N over the samples, so the pair certifies with zero slack.
    """
    a, b = rng.uniform(-2.0, 2.0, 2)
    c, d = rng.uniform(0.0, 2.0), rng.uniform(-2.0, 2.0)
    fn = lambda t: (a * t * t + b * t + c * np.exp(d * t), 2 * a * t + b + c * d * np.exp(d * t),
                    2 * a + c * d * d * np.exp(d * t))
    g = SampledFunction.from_callable(fn, t0, t1, n)
    N = float(rng.uniform(1.0, 50.0))
    K = float(np.min(g.d2 - g.d1 ** 2 / N))
    return g, K, N


def sample_line(f, k, rng, H=8.0, n=401, x_range=(-0.9, 0.9)):
    """Random quadratic y(x) meeting the line-estimate preconditions.

    The slope at the start is drawn from [1/4, 1] and y'' from the allowed
    band; the interval is short enough that y stays below f and y' above 1/4.
    """
    x0 = float(rng.uniform(*x_range))
    f0 = float(f(x0))
    s = float(rng.uniform(0.3, 1.0))
    y0 = float(rng.uniform(0.0, 0.3)) * f0
    L = 0.5 * (f0 - y0) / (s + k + 1.0)
    xs = np.linspace(x0, x0 + L, n)
    bound = H * k / float(np.max(f(xs)))
    c = 0.5 * float(rng.uniform(-1.0, 1.0)) * min(bound, 0.05 / L)
    dx = xs - x0
    return SampledFunction(xs, y0 + s * dx + c * dx * dx, s + 2.0 * c * dx, np.full(n, 2.0 * c))


def sample_case_data(case, f, k, rng, max_tries=1000):
    """Random endpoint data for a case profile (H1 in the ascending orientation)."""
    from .geometry import classify_pair

    for _ in range(max_tries):
        x = float(rng.uniform(-0.9, 0.9))
        if case == "H0":
            T1 = float(rng.uniform(-1.0, 1.0))
            y = float(rng.uniform(0.0, 1.0) * f(x))
            T2 = float(rng.uniform(0.0, 1.0) * f(T1))
        elif case in ("V", "D"):
            T1 = x + float(rng.uniform(-1.0, 1.0)) * k * 0.5
            y = float(rng.uniform(0.0, 0.3) * f(x))
            T2 = y + float(rng.uniform(0.6, 1.0)) * abs(T1 - x) * 2 + abs(T1 - x)
            if T2 > f(T1):
                continue
        elif case == "H1":
            d = float(rng.uniform(0.1, 1.9)) * k * 0.5
            T1 = x + d
            y = float(rng.uniform(0.0, 0.4) * f(x))
            T2 = y + d * float(rng.uniform(0.51, 0.99))
            if T2 > f(T1) or y + d / 2 > f(T1):
                continue
        else:
            raise ValueError(f"unknown case {case!r}")
        if case != "D" and classify_pair((x, y), (T1, T2)).value != case:
            continue
        return CaseData(x, y, T1, T2, float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.2, 3.0)))
    raise RuntimeError(f"no {case} sample found in {max_tries} tries")
