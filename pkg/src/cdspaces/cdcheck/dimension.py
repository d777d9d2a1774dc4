"""Box-counting dimension of the two parts of a collapsed space.

Boxes are the dyadic d_inf boxes [i eps, (i+1) eps) x [j eps, (j+1) eps).
Over a column the region is {0 <= y <= top}, so the count per column is
floor(top / eps) + 1 boxes meeting it, or floor(top / eps) boxes inside it.
The inner count removes the row of boxes along the base, which over the thin
end of a wedge inflates the outer count by a term of order 1/eps.

The fiber height can be far below every tested eps (f < 3k), so the y axis
is rescaled by the maximum of f over the region. The rescaling is
bi-Lipschitz and leaves box dimension unchanged.
"""

from dataclasses import dataclass

import numpy as np

LEFT = "left"
RIGHT = "right"
SQUARE = "square"


@dataclass
class DimensionEstimate:
    region: str
    epsilons: list
    counts: list
    slope: float
    intercept: float
    inner: bool
    y_scale: float

    def to_dict(self):
        return {"region": self.region, "epsilons": self.epsilons, "counts": self.counts,
                "slope": self.slope, "intercept": self.intercept, "inner": self.inner,
                "y_scale": self.y_scale}

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.epsilons, self.counts]), delimiter=",",
                   header="eps,count", comments="", fmt=["%.17g", "%d"])


def column_tops(top, a, b, eps, samples=65):
    """Max of ``top`` over each column of width eps covering [a, b]."""
    n = int(round((b - a) / eps))
    if n < 1 or abs(n * eps - (b - a)) > 1e-12:
        raise ValueError(f"eps = {eps} does not tile [{a}, {b}]")
    edges = a + eps * np.arange(n + 1)
    xs = edges[:-1, None] + eps * np.linspace(0.0, 1.0, samples)[None, :]
    return np.asarray(top(xs), dtype=float).max(axis=1)


def count_boxes(top, a, b, eps, inner=False):
    t = column_tops(top, a, b, eps)
    rows = np.floor(t / eps + 1e-12).astype(np.int64)
    if inner:
        return int(np.sum(np.where(t > 0.0, rows, 1)))
    return int(np.sum(rows + 1))


def box_dimension(f, region, eps_list, inner=None, x_range=(-1.0, 1.0), split=0.0) -> DimensionEstimate:
    """Least-squares slope of log N(eps) against log(1/eps).

    ``region`` is ``"left"`` (x <= split), ``"right"`` (x >= split) or
    ``"square"`` (the unit square, a control with known dimension 2).
    ``inner`` defaults to True on two-dimensional regions.
    """
    eps = np.asarray(sorted((float(e) for e in eps_list), reverse=True))
    if eps.size < 3:
        raise ValueError("at least 3 scales are needed")
    if region == LEFT:
        a, b = x_range[0], split
        scale = float(np.max(f(np.linspace(a, b, 4097))))
    elif region == RIGHT:
        a, b = split, x_range[1]
        scale = float(np.max(f(np.linspace(a, b, 4097))))
    elif region == SQUARE:
        a, b, scale = 0.0, 1.0, 1.0
    else:
        raise ValueError(f"unknown region {region!r}")
    if region == SQUARE:
        top = lambda x: np.ones_like(x)
    elif scale > 0.0:
        top = lambda x: np.asarray(f(x), dtype=float) / scale
    else:
        top = lambda x: np.zeros_like(x)
    if inner is None:
        inner = scale > 0.0
    counts = [count_boxes(top, a, b, e, inner) for e in eps]
    slope, intercept = np.polyfit(np.log(1.0 / eps), np.log(counts), 1)
    return DimensionEstimate(region, [float(e) for e in eps], counts, float(slope), float(intercept),
                             bool(inner), scale)
