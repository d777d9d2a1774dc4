"""Pointwise Jacobi criterion and the midpoint entropy test.

For a structured map T and the midpoint map M, the entropy inequality at
the midpoint follows from the pointwise bound

    (m(M) J_M)^(1/N) >= 1/2 (m(T) J_T)^(1/N) + 1/2 m^(1/N)

at mu0-almost every point, where J_M is the Jacobian of z -> M(z, T(z)).
Both Jacobians are taken by grid-neighbor differences in (x, u).
"""

from dataclasses import dataclass

import numpy as np

from ..geometry import CLASS_CODES, classify_codes, midpoint_arrays
from ..measure import (
    DiscreteMeasure,
    boltzmann_entropy,
    density_m_arrays,
    gauss_partial,
    gauss_partial_inv,
    renyi_entropy,
)
from ..transport import StructuredMap, build_stencil, map_jacobian, stencil_partials


def composite_midpoint(T: StructuredMap, x, u, check=True):
    """M(z, T(z)) for z = (x, u f(x)); returns (Mx, My, class codes)."""
    p = T.grid.params
    f = p.f
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    t1 = T.T1(x)
    t2 = T.Tu(x, u) * np.asarray(f(t1), dtype=float)
    y = u * np.asarray(f(x), dtype=float)
    return midpoint_arrays(x, y, t1, t2, f, k=p.k if check else None, check=check)


@dataclass
class CdReport:
    N_prime: float
    cells: np.ndarray
    slack: np.ndarray
    min_slack: float
    argmin_cell: int
    tol: float
    passed: bool
    point_count: int
    excluded_count: int
    one_sided_count: int
    case_counts: dict
    deficit_counts: dict

    def to_dict(self):
        return {
            "N_prime": self.N_prime, "min_slack": self.min_slack, "argmin_cell": self.argmin_cell,
            "tol": self.tol, "passed": self.passed, "point_count": self.point_count,
            "excluded_count": self.excluded_count, "one_sided_count": self.one_sided_count,
            "case_counts": self.case_counts, "deficit_counts": self.deficit_counts,
        }

    def to_csv(self, path, grid):
        c = self.cells
        np.savetxt(path, np.column_stack([grid.x[c], grid.y[c], self.slack]), delimiter=",",
                   header="x,y,slack", comments="", fmt="%.17g")


@dataclass
class JacobianTerms:
    """Per-cell quantities entering the pointwise inequality."""

    cells: np.ndarray
    mJ_mid: np.ndarray
    mJ_end: np.ndarray
    m_start: np.ndarray
    codes: np.ndarray
    one_sided: np.ndarray


def jacobian_terms(T: StructuredMap) -> JacobianTerms:
    g = T.grid
    p = g.params
    f, K = p.f, p.K
    st = build_stencil(T.mu0)

    def mid_xu(x, u):
        mx, my, _ = composite_midpoint(T, x, u)
        fm = np.asarray(f(mx), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = np.where(fm > 0, my / np.where(fm > 0, fm, 1.0), 0.0)
        return np.stack([mx, mu])

    v0, dx, du = stencil_partials(st, mid_xu)
    det_xu = dx[0] * du[1] - du[0] * dx[1]
    mx = v0[0]
    my = v0[1] * np.asarray(f(mx), dtype=float)
    fx = np.asarray(f(st.x), dtype=float)
    # (x, u) -> (x, y) scales areas by f(x) at the input and f(Mx) at the output
    J_mid = det_xu * np.asarray(f(mx), dtype=float) / fx
    jf = map_jacobian(T)
    t1, t2, _ = T.at_cells(st.cells)
    y = g.y[st.cells]
    codes = classify_codes(t1 - st.x, t2 - y)
    return JacobianTerms(
        st.cells,
        density_m_arrays(mx, my, f, K) * J_mid,
        density_m_arrays(t1, t2, f, K) * jf.J,
        density_m_arrays(st.x, y, f, K),
        codes,
        st.boundary | jf.boundary,
    )


def pointwise_slack(terms: JacobianTerms, N):
    inv = 1.0 / N
    valid = (terms.mJ_mid > 0) & (terms.mJ_end > 0)
    lhs = np.where(valid, np.maximum(terms.mJ_mid, 0.0) ** inv, np.nan)
    rhs = 0.5 * np.maximum(terms.mJ_end, 0.0) ** inv + 0.5 * terms.m_start ** inv
    return lhs - rhs, valid


def pointwise_cd_check(T: StructuredMap, N_prime: float, tol: float = 1e-4, terms=None) -> CdReport:
    """Evaluate the pointwise inequality at every support cell of mu0.

    Cells with a nonpositive Jacobian are excluded and counted.
    """
    terms = jacobian_terms(T) if terms is None else terms
    slack, valid = pointwise_slack(terms, N_prime)
    s = slack[valid]
    a = int(np.argmin(s)) if s.size else -1
    ms = float(s[a]) if s.size else float("nan")
    names = [c.value for c in CLASS_CODES]
    case_counts = {n: int(np.sum(terms.codes[valid] == i)) for i, n in enumerate(names)}
    deficit = valid.copy()
    deficit[valid] = slack[valid] < -tol
    deficit_counts = {n: int(np.sum(terms.codes[deficit] == i)) for i, n in enumerate(names)}
    return CdReport(
        float(N_prime), terms.cells[valid], s, ms,
        int(terms.cells[valid][a]) if s.size else -1, float(tol),
        bool(s.size and ms >= -tol), int(valid.sum()), int((~valid).sum()),
        int(terms.one_sided.sum()), case_counts, deficit_counts,
    )


def _overlap_fractions(lo, hi, edges, cdf=None, span=4):
    """Fractions of each interval [lo, hi] falling in consecutive cells of ``edges``.

    Returns ``(first_index, fractions)`` with fractions of shape (n, span);
    ``cdf`` weights the overlap (Lebesgue length if omitted).
    """
    n = edges.size - 1
    lo = np.minimum(lo, hi)
    i0 = np.clip(np.searchsorted(edges, lo, side="right") - 1, 0, n - 1)
    F = (lambda v: v) if cdf is None else cdf
    total = F(hi) - F(lo)
    fr = np.zeros((lo.size, span))
    for o in range(span):
        idx = np.clip(i0 + o, 0, n - 1)
        a = np.maximum(lo, edges[idx])
        b = np.minimum(hi, edges[idx + 1])
        ov = np.where((i0 + o < n) & (b > a), F(b) - F(a), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            fr[:, o] = np.where(total > 0, ov / total, 0.0)
    degenerate = ~(total > 0)
    fr[degenerate, 0] = 1.0
    covered = fr.sum(axis=1)
    return i0, fr, covered


def push_midpoint(T: StructuredMap, supersample: int = 4, max_loss: float = 1e-8):
    """mu_1/2 = (M o (id, T))_# mu0, re-binned conservatively to the grid.

    Each source cell is cut into ``supersample``^2 pieces of equal m-mass.
    A piece is mapped to the rectangle spanned by the images of its edges
    (x-image from the x-edges, fiber image from the u-edges at the piece's
    central x) and its mass is spread by length overlap in x and m-weight
    overlap in u. The composite map is monotone in both variables, so the
    image rectangles do not fold.
    """
    g = T.grid
    mu0 = T.mu0
    cells = mu0.support
    if np.any(g.uj[cells] < 0):
        raise ValueError("source must live on the two-dimensional part")
    f = g.params.f
    s = supersample
    K = g.params.K
    fr = np.arange(s + 1) / s
    xe = g.x_edges[g.col[cells]][:, None] + fr[None, :] * g.dx  # (n, s+1)
    j = g.uj[cells]
    E0 = gauss_partial(K, g.u_edges[j])
    E1 = gauss_partial(K, g.u_edges[j + 1])
    ue = gauss_partial_inv(K, E0[:, None] + fr[None, :] * (E1 - E0)[:, None])  # equal m-mass cuts
    n = cells.size
    # every midpoint class puts the midpoint at x = (x0 + x1) / 2
    mx_e = 0.5 * (xe + T.T1(xe))
    xc = 0.5 * (xe[:, :-1] + xe[:, 1:])  # (n, s)
    Xc = np.repeat(xc[:, :, None], s + 1, axis=2)
    Ue = np.repeat(ue[:, None, :], s, axis=1)
    mxc, myc, _ = composite_midpoint(T, Xc.reshape(-1), Ue.reshape(-1))
    fm = np.asarray(f(mxc), dtype=float)
    mu_e = np.where(fm > 0, myc / np.where(fm > 0, fm, 1.0), 0.0).reshape(n, s, s + 1)

    piece_mass = mu0.mass[cells] / (s * s)
    out = np.zeros(g.ncells)
    cdf = lambda v: gauss_partial(K, v)
    lost = 0.0
    for a in range(s):
        ix, fx, cx = _overlap_fractions(mx_e[:, a], mx_e[:, a + 1], g.x_edges)
        for b in range(s):
            iu, fu, cu = _overlap_fractions(mu_e[:, a, b], mu_e[:, a, b + 1], g.u_edges, cdf)
            lost += float(np.sum(piece_mass * (1.0 - cx * cu)))
            for ox in range(fx.shape[1]):
                col = np.clip(ix + ox, 0, g.ncols - 1)
                if np.any(g.singular_col[col] & (fx[:, ox] > 0)):
                    raise ValueError("midpoint lands on a collapsed column")
                for ou in range(fu.shape[1]):
                    w = piece_mass * fx[:, ox] * fu[:, ou]
                    idx = g.cell_index(col, np.clip(iu + ou, 0, g.nu - 1))
                    np.add.at(out, idx, w)
    if lost > max_loss:
        raise ValueError(f"re-binning lost mass {lost:.3e} > {max_loss:.1e}")
    return DiscreteMeasure.from_mass(g, out), lost


@dataclass
class EntropyVerdict:
    N: float  # inf for the Boltzmann entropy
    S0: float
    S_half: float
    S1: float
    gap: float  # 1/2 S0 + 1/2 S1 - S_half
    tol: float
    passed: bool

    def to_dict(self):
        return {"N": "inf" if np.isinf(self.N) else self.N, "S0": self.S0, "S_half": self.S_half,
                "S1": self.S1, "gap": self.gap, "tol": self.tol, "passed": self.passed}


def entropy_verdicts(mu0, mu_half, mu1, N_list, tol=1e-8):
    out = []
    for N in N_list:
        if np.isinf(N):
            S = [boltzmann_entropy(m) for m in (mu0, mu_half, mu1)]
        else:
            S = [renyi_entropy(m, N) for m in (mu0, mu_half, mu1)]
        gap = 0.5 * S[0] + 0.5 * S[2] - S[1]
        out.append(EntropyVerdict(float(N), S[0], S[1], S[2], gap, tol, gap >= -tol))
    return out


def midpoint_entropy_test(T: StructuredMap, N_list=(515.0, 1030.0, np.inf), tol=1e-8, supersample=4):
    """Convexity of S_N (and Ent for N = inf) at the midpoint selected through T."""
    mu_half, lost = push_midpoint(T, supersample)
    return entropy_verdicts(T.mu0, mu_half, T.mu1, N_list, tol), mu_half, lost
