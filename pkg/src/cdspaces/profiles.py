"""Profile functions f on [-1, 1] and the class F_k audit.

A profile defines the space X_f = {(x, y): -1 <= x <= 1, 0 <= y <= f(x)}.
The regular class F_k asks for 0 < f < 3k, |f'| <= k and |f''| <= 1; its
closure only asks for 0 <= f and lets the fiber collapse where f vanishes.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
import sympy as sp

from ._expr import (
    NonSmoothError,
    ParseError,
    UnknownIdentifierError,
    parse_expression,
)

__all__ = [
    "ProfileFn",
    "MembershipReport",
    "ParseError",
    "UnknownIdentifierError",
    "NonSmoothError",
    "parse_profile",
    "validate_membership",
    "preset",
    "profile_from_source",
    "PRESETS",
    "DEFAULT_K",
]

# smallest power of two with 2k^2 + 4k < 2^-12, with margin
DEFAULT_K = 2.0 ** -15

F_K = "F_k"
CLOSURE = "closure-only"
REJECTED = "rejected"


def _as_float_array(fn):
    def wrapped(x):
        xa = np.asarray(x, dtype=float)
        out = np.asarray(fn(xa), dtype=float)
        if out.shape != xa.shape:
            out = np.broadcast_to(out, xa.shape).copy()
        if xa.ndim == 0:
            return float(out)
        return out

    return wrapped


@dataclass(frozen=True)
class ProfileFn:
    """A C^2 profile with its first and second derivatives.

    The three callables accept scalars or numpy arrays and return the same
    shape. ``source`` is the parsed text (or the preset name).
    """

    f: Callable
    d1: Callable
    d2: Callable
    source: str = ""
    params: Mapping[str, float] = field(default_factory=dict)

    def eval(self, x):
        return self.f(x)

    def eval_d1(self, x):
        return self.d1(x)

    def eval_d2(self, x):
        return self.d2(x)

    def __call__(self, x):
        return self.f(x)

    def shifted(self, eps):
        """The profile f + eps (used to regularize singular profiles)."""
        f, d1, d2 = self.f, self.d1, self.d2
        return ProfileFn(
            f=lambda x: f(x) + eps,
            d1=d1,
            d2=d2,
            source=f"({self.source})+{eps!r}",
            params=dict(self.params),
        )


def parse_profile(src: str, params: Optional[Mapping[str, float]] = None) -> ProfileFn:
    """Parse a profile expression in ``x`` and differentiate it symbolically.

    Parameters
    ----------
    src : str
        Expression over ``x`` using ``+ - * /``, unary minus, parentheses,
        ``sin cos exp tanh sqrt`` and integer powers (``^`` or ``**``).
    params : mapping, optional
        Named real constants (``k`` is usually among them).

    Raises
    ------
    ParseError
        On malformed input; ``UnknownIdentifierError`` and ``NonSmoothError``
        are subclasses carrying the offending offset.
    """
    params = dict(params or {})
    x = sp.Symbol("x", real=True)
    names = {"x": x}
    psyms = []
    for name in sorted(params):
        if name == "x":
            raise ValueError("'x' is reserved for the variable")
        s = sp.Symbol(name, real=True)
        names[name] = s
        psyms.append(s)
    expr = parse_expression(src, names)
    d1 = sp.diff(expr, x)
    d2 = sp.diff(d1, x)
    values = [float(params[str(s)]) for s in psyms]
    args = (x, *psyms)

    def compile_(e):
        fn = sp.lambdify(args, e, modules="numpy")
        return _as_float_array(lambda xa: fn(xa, *values))

    return ProfileFn(f=compile_(expr), d1=compile_(d1), d2=compile_(d2), source=src, params=params)


@dataclass(frozen=True)
class MembershipReport:
    cls: str
    violated_bound: Optional[str]
    where: Optional[float]
    sample_count: int
    f_min: float
    f_max: float
    d1_max: float
    d2_max: float

    def to_dict(self):
        return {
            "class": self.cls,
            "violated_bound": self.violated_bound,
            "where": self.where,
            "sample_count": self.sample_count,
            "f_min": self.f_min,
            "f_max": self.f_max,
            "d1_max": self.d1_max,
            "d2_max": self.d2_max,
        }


def validate_membership(f: ProfileFn, k: float, audit_n: int = 4096) -> MembershipReport:
    """Audit the F_k bounds on ``audit_n`` uniform samples of [-1, 1] (endpoints included).

    Dense sampling only: no interval-arithmetic guarantee between samples.
    """
    if not (0.0 < k < 0.25):
        raise ValueError(f"k must lie in (0, 1/4), got {k}")
    if audit_n < 1000:
        raise ValueError("audit_n must be at least 1000")
    xs = np.linspace(-1.0, 1.0, audit_n)
    fv = np.asarray(f.eval(xs), dtype=float)
    d1 = np.asarray(f.eval_d1(xs), dtype=float)
    d2 = np.asarray(f.eval_d2(xs), dtype=float)
    stats = dict(
        sample_count=audit_n,
        f_min=float(np.nanmin(fv)) if np.isfinite(fv).any() else float("nan"),
        f_max=float(np.nanmax(fv)) if np.isfinite(fv).any() else float("nan"),
        d1_max=float(np.nanmax(np.abs(d1))) if np.isfinite(d1).any() else float("nan"),
        d2_max=float(np.nanmax(np.abs(d2))) if np.isfinite(d2).any() else float("nan"),
    )

    finite = np.isfinite(fv) & np.isfinite(d1) & np.isfinite(d2)
    checks = [
        ("finite", ~finite),
        ("positivity", fv < 0.0),
        ("upper", fv >= 3.0 * k),
        ("slope", np.abs(d1) > k),
        ("curvature", np.abs(d2) > 1.0),
    ]
    # first violated bound in scan order, reported at its first sample
    first = None
    for name, bad in checks:
        if bad.any():
            idx = int(np.argmax(bad))
            if first is None or idx < first[1]:
                first = (name, idx)
    if first is not None:
        return MembershipReport(REJECTED, first[0], float(xs[first[1]]), **stats)
    if (fv == 0.0).any():
        return MembershipReport(CLOSURE, None, None, **stats)
    return MembershipReport(F_K, None, None, **stats)


def _constant(k):
    return ProfileFn(
        f=_as_float_array(lambda x: np.full_like(x, k)),
        d1=_as_float_array(lambda x: np.zeros_like(x)),
        d2=_as_float_array(lambda x: np.zeros_like(x)),
        source="constant",
        params={"k": k},
    )


def _valley(k):
    return ProfileFn(
        f=_as_float_array(lambda x: k * (2.0 + x * x) / 2.0),
        d1=_as_float_array(lambda x: k * x),
        d2=_as_float_array(lambda x: np.full_like(x, k)),
        source="valley",
        params={"k": k},
    )


def _ramp(k):
    # (k/3) max(x, 0)^3: zero set [-1, 0], C^2 across 0
    def f(x):
        p = np.maximum(x, 0.0)
        return k * p ** 3 / 3.0

    def d1(x):
        p = np.maximum(x, 0.0)
        return k * p ** 2

    def d2(x):
        return 2.0 * k * np.maximum(x, 0.0)

    return ProfileFn(
        f=_as_float_array(f), d1=_as_float_array(d1), d2=_as_float_array(d2),
        source="ramp-smoothed", params={"k": k},
    )


def _cone(k):
    # boundary y = kx of the wedge C^k; f'' vanishes off the apex
    return ProfileFn(
        f=_as_float_array(lambda x: k * np.maximum(x, 0.0)),
        d1=_as_float_array(lambda x: np.where(x > 0.0, k, 0.0)),
        d2=_as_float_array(lambda x: np.zeros_like(x)),
        source="cone",
        params={"k": k},
    )


PRESETS = {
    "constant": _constant,
    "valley": _valley,
    "ramp-smoothed": _ramp,
    "cone": _cone,
}


def preset(name: str, k: float = DEFAULT_K) -> ProfileFn:
    try:
        return PRESETS[name](k)
    except KeyError:
        raise KeyError(f"unknown profile preset {name!r}; known: {sorted(PRESETS)}") from None


def profile_from_source(source: str, k: float = DEFAULT_K, params=None) -> ProfileFn:
    """Preset name or expression; ``k`` is always available to expressions."""
    if source in PRESETS:
        return preset(source, k)
    merged = {"k": k}
    merged.update(params or {})
    return parse_profile(source, merged)
