"""Grid Legendre transforms between g_pp(s, 1-s) and g_pl(h1, 0).

In two dimensions with R = {e1, e2} a tilt matters only through h1 - h2
(adding c(1,1) shifts g_pl by c), so point-to-level curves are stored on the
h2 = 0 slice.
"""
from __future__ import annotations

import numpy as np

from .oracles import FreeEnergyCurve

MIN_POINTS = 200


class GridTooCoarse(ValueError):
    def __init__(self, message, suggested_box=None):
        super().__init__(message)
        self.suggested_box = suggested_box


def _vertex(x, y, i):
    """Vertex of the parabola through grid points i-1, i, i+1 (any spacing)."""
    xs = x[i - 1:i + 2]
    c = xs[1]
    coef = np.polyfit(xs - c, y[i - 1:i + 2], 2)
    if coef[0] == 0:
        return float(x[i]), float(y[i])
    t = np.clip(-coef[1] / (2 * coef[0]), xs[0] - c, xs[2] - c)
    return float(c + t), float(np.polyval(coef, t))


def _extremum(x, y, maximize: bool):
    k = int(np.argmax(y) if maximize else np.argmin(y))
    if 0 < k < len(x) - 1:
        return k, *_vertex(x, y, k)
    return k, float(x[k]), float(y[k])


def _check(curve: FreeEnergyCurve, variable: str):
    if curve.variable != variable:
        raise ValueError(f"expected a curve over {variable}")
    if len(curve.grid) < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points, got {len(curve.grid)}")


def legendre_pl_from_pp(curve: FreeEnergyCurve, h) -> tuple[float, np.ndarray]:
    """sup over s of g_pp(s, 1-s) + h.(s, 1-s); returns (value, maximizing xi).

    The sup runs over the curve's s-range; a maximizer on its edge is accepted
    since the velocity set is compact.
    """
    _check(curve, "s")
    h = np.asarray(h, dtype=float)
    s = curve.grid
    y = curve.values + h[0] * s + h[1] * (1 - s)
    _, s_star, val = _extremum(s, y, maximize=True)
    return val, np.array([s_star, 1 - s_star])


def legendre_pp_from_pl(curve: FreeEnergyCurve, v) -> tuple[float, np.ndarray]:
    """inf over h1 of g_pl(h1, 0) - h1 s; returns (value, minimizing tilt with h2 = 0).

    Raises GridTooCoarse when the minimizer sits on the edge of the h-box,
    with a suggested wider box.
    """
    _check(curve, "h1")
    xi = np.atleast_1d(np.asarray(getattr(v, "xi", v), dtype=float))
    s = float(xi[0])
    h1 = curve.grid
    y = curve.values - h1 * s
    k, h_star, val = _extremum(h1, y, maximize=False)
    if k in (0, len(h1) - 1):
        width = h1[-1] - h1[0]
        box = (float(h1[0] - width), float(h1[-1] + width))
        raise GridTooCoarse(f"minimizer at the edge of the h1 box [{h1[0]}, {h1[-1]}]; try {box}",
                            suggested_box=box)
    return val, np.array([h_star, 0.0])


def pl_curve_from_pp(curve: FreeEnergyCurve, h1_grid) -> FreeEnergyCurve:
    """Tabulate g_pl(h1, 0) by transforming a g_pp curve at each h1."""
    h1_grid = np.asarray(h1_grid, dtype=float)
    vals = np.array([legendre_pl_from_pp(curve, (a, 0.0))[0] for a in h1_grid])
    return FreeEnergyCurve(h1_grid, vals, "h1", provenance=curve.provenance)
