"""Reference measure m_{f,K}, its fiber-coordinate discretization, and entropies.

In the coordinates (x, u) with u = y / f(x) the measure m_{f,K} becomes
exp(-K u^2) dx du, independent of f. The grid is built in these coordinates,
so every column carries exactly C_K * dx of mass. Columns where f vanishes
collapse to one atom of weight C_K * dx at (x, 0), which is the singular
measure C_K H^1 restricted to {f = 0}.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special

from .profiles import CLOSURE, F_K, ProfileFn, validate_membership

COMPACT = "compact"
NONCOMPACT = "noncompact"


def c_K(K: float) -> float:
    """C_K = int_0^1 exp(-K u^2) du by adaptive quadrature (abs. error 1e-12)."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    val, _ = integrate.quad(lambda u: np.exp(-K * u * u), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return float(val)


def gauss_partial(K, u):
    """E(u) = int_0^u exp(-K s^2) ds via erf."""
    u = np.asarray(u, dtype=float)
    if K == 0:
        return u.copy()
    r = np.sqrt(K)
    return 0.5 * np.sqrt(np.pi) / r * special.erf(r * u)


def gauss_partial_inv(K, e):
    e = np.asarray(e, dtype=float)
    if K == 0:
        return e.copy()
    r = np.sqrt(K)
    return special.erfinv(np.clip(e * 2.0 * r / np.sqrt(np.pi), -1.0, 1.0)) / r


@dataclass
class SpaceParams:
    """Parameters of (X_f, d_inf, m_{f,K}).

    ``variant="noncompact"`` is the cone space L u C^k over [-R, R]; the
    profile is then ``k * max(x, 0)`` and ``singular`` is forced on.
    """

    f: ProfileFn
    k: float
    K: float = 16.0
    variant: str = COMPACT
    R: float = 4.0
    singular: bool = False

    def __post_init__(self):
        if not (0.0 < self.k < 0.25):
            raise ValueError(f"k must lie in (0, 1/4), got {self.k}")
        if self.K < 1.0:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.variant not in (COMPACT, NONCOMPACT):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == NONCOMPACT:
            self.singular = True
            if self.R <= 0:
                raise ValueError("R must be positive")
        else:
            report = validate_membership(self.f, self.k)
            allowed = (F_K, CLOSURE) if self.singular else (F_K,)
            if report.cls not in allowed:
                raise ValueError(
                    f"profile is {report.cls} for k={self.k}"
                    + (f" ({report.violated_bound} at x={report.where})" if report.violated_bound else "")
                )

    @property
    def x_range(self):
        return (-1.0, 1.0) if self.variant == COMPACT else (-float(self.R), float(self.R))

    @property
    def C_K(self):
        return c_K(self.K)


def density_m(p, params: SpaceParams) -> float:
    """(1 / f(x)) exp(-K (y / f(x))^2)."""
    x, y = p
    fx = float(params.f(x))
    if fx <= 0.0:
        raise ZeroDivisionError(f"f vanishes at x={x}: use the segment atoms of the grid")
    u = y / fx
    return float(np.exp(-params.K * u * u) / fx)


def density_m_arrays(x, y, f, K):
    fx = np.asarray(f(x), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.asarray(y) / fx
        return np.where(fx > 0.0, np.exp(-K * u * u) / fx, np.nan)


@dataclass
class Grid:
    """Fiber-coordinate grid of X_f.

    Cells are stored flat and column-major: the cells of column ``i`` are
    ``col_start[i] : col_start[i] + col_count[i]``. A singular column has a
    single atom with ``uj == -1``.
    """

    params: SpaceParams
    nx: int
    nu: int
    x_edges: np.ndarray
    u_edges: np.ndarray
    I: np.ndarray  # per-u-cell integral of exp(-K u^2)
    singular_col: np.ndarray
    col_start: np.ndarray
    col_count: np.ndarray
    col: np.ndarray
    uj: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    w: np.ndarray
    C_K: float = field(default=0.0)

    @property
    def dx(self):
        return float(self.x_edges[1] - self.x_edges[0])

    @property
    def du(self):
        return float(self.u_edges[1] - self.u_edges[0])

    @property
    def ncols(self):
        return self.x_edges.size - 1

    @property
    def ncells(self):
        return self.w.size

    @property
    def x_centers(self):
        return 0.5 * (self.x_edges[:-1] + self.x_edges[1:])

    @property
    def u_centers(self):
        return 0.5 * (self.u_edges[:-1] + self.u_edges[1:])

    def column_mass(self, values=None):
        v = self.w if values is None else values
        return np.bincount(self.col, weights=v, minlength=self.ncols)

    def cell_index(self, i, j):
        """Flat index of cell (i, j); ``j`` is ignored for singular columns."""
        i = np.asarray(i)
        j = np.asarray(j)
        return np.where(self.singular_col[i], self.col_start[i], self.col_start[i] + j)

    def locate(self, x, y, strict=True):
        """Flat cell indices containing the points; -1 for points off the grid."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lo, hi = self.x_edges[0], self.x_edges[-1]
        i = np.floor((x - lo) / self.dx).astype(np.int64)
        i = np.where(x == hi, self.ncols - 1, i)
        inside = (i >= 0) & (i < self.ncols)
        ic = np.clip(i, 0, self.ncols - 1)
        fx = np.asarray(self.params.f(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(fx > 0.0, y / np.where(fx > 0.0, fx, 1.0), 0.0)
        j = np.clip(np.floor(u * self.nu).astype(np.int64), 0, self.nu - 1)
        if strict:
            inside &= (u >= -1e-9) & (u <= 1.0 + 1e-9)
        idx = self.cell_index(ic, j)
        return np.where(inside, idx, -1)

    def to_dict(self, density=None):
        cells = []
        for c in range(self.ncells):
            rec = {"index": c, "col": int(self.col[c]), "uj": int(self.uj[c]),
                   "center": [float(self.x[c]), float(self.y[c])], "weight": float(self.w[c])}
            if density is not None:
                rec["density"] = float(density[c])
            cells.append(rec)
        return {"nx": self.nx, "nu": self.nu, "C_K": self.C_K,
                "x_edges": [float(v) for v in self.x_edges], "cells": cells}

    def marginal_csv(self, path, values=None):
        mass = self.column_mass(values)
        np.savetxt(path, np.column_stack([self.x_centers, mass / self.dx]), delimiter=",",
                   header="x,marginal_density", comments="", fmt="%.17g")


def build_grid(params: SpaceParams, nx: int, nu: int) -> Grid:
    """Grid with ``nx`` columns per unit length 2 and ``nu`` fiber cells per column.

    The compact space [-1, 1] gets ``nx`` columns; the cone space over
    [-R, R] gets ``nx * R`` columns of the same width 2 / nx.
    """
    if nx < 2 or nu < 2:
        raise ValueError("nx and nu must be at least 2")
    lo, hi = params.x_range
    ncols = nx if params.variant == COMPACT else int(round(nx * params.R))
    x_edges = np.linspace(lo, hi, ncols + 1)
    u_edges = np.linspace(0.0, 1.0, nu + 1)
    E = gauss_partial(params.K, u_edges)
    I = np.diff(E)
    CK = c_K(params.K)
    dx = (hi - lo) / ncols
    xc = 0.5 * (x_edges[:-1] + x_edges[1:])
    fc = np.asarray(params.f(xc), dtype=float)
    singular = fc <= 0.0
    if singular.any() and not params.singular:
        raise ValueError("profile vanishes at a column center but the space is not singular")
    counts = np.where(singular, 1, nu)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    col = np.repeat(np.arange(ncols), counts)
    uj = np.concatenate([[-1] if s else np.arange(nu) for s in singular]).astype(np.int64)
    uc = 0.5 * (u_edges[:-1] + u_edges[1:])
    u = np.where(uj >= 0, uc[np.maximum(uj, 0)], 0.0)
    x = xc[col]
    y = u * fc[col]
    # per-cell weight; the atom of a collapsed column carries the whole column
    w = np.where(uj >= 0, dx * I[np.maximum(uj, 0)], CK * dx)
    return Grid(params, nx, nu, x_edges, u_edges, I, singular, starts, counts, col, uj, x, u, y, w, CK)


@dataclass
class DiscreteMeasure:
    """Probability measure rho * m on the grid; ``density`` is rho per cell."""

    grid: Grid
    density: np.ndarray

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        if self.density.shape != self.grid.w.shape:
            raise ValueError("one density value per grid cell")
        if not np.all(np.isfinite(self.density)) or (self.density < 0).any():
            raise ValueError("densities must be finite and nonnegative")
        total = self.mass.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"total mass must be 1 within 1e-12, got {total!r}")

    @property
    def mass(self):
        return self.density * self.grid.w

    @property
    def support(self):
        return np.flatnonzero(self.density > 0.0)

    @classmethod
    def from_mass(cls, grid, mass):
        mass = np.asarray(mass, dtype=float)
        total = mass.sum()
        if total <= 0:
            raise ValueError("measure has no mass")
        return cls(grid, mass / total / grid.w)

    def to_json(self):
        return json.dumps(self.grid.to_dict(self.density), sort_keys=True)


def _overlap(edges, lo, hi):
    return np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)


def block_measure(grid, x_lo, x_hi, shape="uniform", u_range=(0.0, 1.0), u_shape="flat"):
    """Measure with density proportional to a(x) b(u) on [x_lo, x_hi] x u_range.

    ``shape`` is ``"uniform"`` or ``"smooth"`` (a(x) = 1 + 0.3 sin(pi s) with
    s the relative position in the block); ``u_shape`` is ``"flat"`` or
    ``"smooth"`` (b(u) = 1 + 0.3 cos(pi u)). Columns and fiber cells partially
    covered by the block are weighted by their covered fraction; on singular
    columns ``u_range`` is ignored.
    """
    if x_hi <= x_lo:
        raise ValueError("empty block")
    frac_x = _overlap(grid.x_edges, x_lo, x_hi) / grid.dx
    xc = grid.x_centers
    if shape == "uniform":
        a = np.ones_like(xc)
    elif shape == "smooth":
        s = np.clip((xc - x_lo) / (x_hi - x_lo), 0.0, 1.0)
        a = 1.0 + 0.3 * np.sin(np.pi * s)
    else:
        raise ValueError(f"unknown shape {shape!r}")
    frac_u = _overlap(grid.u_edges, *u_range) / grid.du
    uc = grid.u_centers
    if u_shape == "flat":
        b = np.ones_like(uc)
    elif u_shape == "smooth":
        b = 1.0 + 0.3 * np.cos(np.pi * uc)
    else:
        raise ValueError(f"unknown u_shape {u_shape!r}")
    colfac = (frac_x * a)[grid.col]
    ufac = np.where(grid.uj >= 0, (frac_u * b)[np.maximum(grid.uj, 0)], 1.0)
    return DiscreteMeasure.from_mass(grid, colfac * ufac * grid.w)


def fiber_measure(grid, x0, u_range=(0.0, 1.0)):
    """Uniform-in-m measure on the single column containing ``x0``."""
    i = int(np.clip(np.floor((x0 - grid.x_edges[0]) / grid.dx), 0, grid.ncols - 1))
    mass = np.zeros(grid.ncells)
    sl = slice(grid.col_start[i], grid.col_start[i] + grid.col_count[i])
    if grid.singular_col[i]:
        mass[sl] = 1.0
    else:
        frac_u = _overlap(grid.u_edges, *u_range) / grid.du
        mass[sl] = frac_u * grid.w[sl]
    return DiscreteMeasure.from_mass(grid, mass)


def renyi_entropy(mu: DiscreteMeasure, N: float) -> float:
    """S_N(mu) = -sum rho^(1 - 1/N) w, cells with rho = 0 contribute 0."""
    if N <= 1:
        raise ValueError("N must exceed 1")
    rho = mu.density
    pos = rho > 0.0
    return float(-np.sum(rho[pos] ** (1.0 - 1.0 / N) * mu.grid.w[pos]))


def boltzmann_entropy(mu: DiscreteMeasure) -> float:
    """Ent(mu) = sum rho log(rho) w with 0 log 0 = 0."""
    rho = mu.density
    pos = rho > 0.0
    return float(np.sum(rho[pos] * np.log(rho[pos]) * mu.grid.w[pos]))


def rebin(grid, x, y, mass, max_loss=1e-8):
    """Accumulate point masses into grid cells; raise if more than ``max_loss`` falls off."""
    idx = grid.locate(x, y)
    lost = float(np.sum(np.asarray(mass)[idx < 0]))
    if lost > max_loss:
        raise ValueError(f"re-binning lost mass {lost:.3e} > {max_loss:.1e}")
    ok = idx >= 0
    out = np.bincount(idx[ok], weights=np.asarray(mass)[ok], minlength=grid.ncells)
    return DiscreteMeasure.from_mass(grid, out), lost
