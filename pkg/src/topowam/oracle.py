"""Brute-force reference computations used to cross-check the fast paths.

Nothing here imports from the production geometry, Delaunay or autodiff
modules; each routine re-derives its answer from first principles.
"""
import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from .errors import SegmentsTooClose, TooFewPoints, TooManyPoints


@dataclass(frozen=True)
class QuadratureSpec:
    nodes: int = 64
    # geometric growth of panel widths away from the closest-approach point
    grading: float = 4.0

    def __post_init__(self):
        if not 2 <= self.nodes <= 256:
            raise ValueError("nodes per axis must lie in [2, 256]")


def _closest_params(a0, a1, b0, b1):
    da, db = a1 - a0, b1 - b0

    def f(x):
        d = a0 + x[0] * da - b0 - x[1] * db
        return d @ d, np.array([2 * d @ da, -2 * d @ db])

    best = None
    for start in ((0.5, 0.5), (0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)):
        res = minimize(f, start, jac=True, method="L-BFGS-B", bounds=[(0, 1), (0, 1)],
                       options={"ftol": 1e-15, "gtol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res
    s, t = best.x
    return s, t, float(np.sqrt(max(best.fun, 0.0)))


def _graded_rule(center, h0, spec):
    """Composite Gauss-Legendre nodes/weights on [0, 1] refined toward ``center``."""
    cuts = {0.0, 1.0}
    h = h0
    while h < 1.0:
        for c in (center - h, center + h):
            if 0.0 < c < 1.0:
                cuts.add(c)
        h *= spec.grading
    cuts = sorted(cuts)
    x, w = np.polynomial.legendre.leggauss(spec.nodes)
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        nodes.append(lo + (x + 1) * (hi - lo) / 2)
        weights.append(w * (hi - lo) / 2)
    return np.concatenate(nodes), np.concatenate(weights)


def gli_quadrature(s1, s2, spec=QuadratureSpec()):
    """Numerical double line integral of the linking kernel over two segments.

    ``s1`` and ``s2`` are ``(start, end)`` point pairs.  Each parameter axis
    uses ``spec.nodes``-point Gauss-Legendre panels, graded geometrically
    around the closest-approach parameters.
    """
    a0, a1 = (np.asarray(p, dtype=float) for p in s1)
    b0, b1 = (np.asarray(p, dtype=float) for p in s2)
    s, t, dist = _closest_params(a0, a1, b0, b1)
    if dist <= 1e-3:
        raise SegmentsTooClose(f"segments {dist:.3g} m apart; quadrature unreliable below 1e-3 m")
    da, db = a1 - a0, b1 - b0
    u, wu = _graded_rule(s, dist / np.linalg.norm(da), spec)
    v, wv = _graded_rule(t, dist / np.linalg.norm(db), spec)
    g1 = a0 + u[:, None] * da
    g2 = b0 + v[:, None] * db
    diff = g1[:, None, :] - g2[None, :, :]
    num = diff @ np.cross(da, db)
    r3 = np.sum(diff * diff, axis=-1) ** 1.5
    return float(wu @ (num / r3) @ wv / (4 * np.pi))


# --- Delaunay by exhaustive empty-circumsphere search --------------------------


def _circumsphere_exact(p):
    """Exact circumcentre and squared radius of 4 rational points (None if flat)."""
    a = p[0]
    rows = [[p[k][i] - a[i] for i in range(3)] for k in (1, 2, 3)]
    rhs = [sum(c * c for c in r) / 2 for r in rows]

    def det3(m):
        return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))

    d = det3(rows)
    if d == 0:
        return None
    center = []
    for col in range(3):
        m = [[rhs[k] if j == col else rows[k][j] for j in range(3)] for k in range(3)]
        center.append(det3(m) / d)
    r2 = sum(c * c for c in center)
    return [center[i] + a[i] for i in range(3)], r2


def delaunay_bruteforce(points):
    """Edges of every 4-subset whose circumsphere is empty of the other points.

    Arithmetic is exact (rational), so the input should already be in general
    position; ties on a sphere count as empty.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 4:
        raise TooFewPoints("need at least 4 points")
    if n > 16:
        raise TooManyPoints("brute-force Delaunay is limited to 16 points")
    q = [[Fraction(float(c)) for c in row] for row in pts]
    edges = set()
    for quad in itertools.combinations(range(n), 4):
        sphere = _circumsphere_exact([q[i] for i in quad])
        if sphere is None:
            continue
        c, r2 = sphere
        empty = True
        for k in range(n):
            if k in quad:
                continue
            d2 = sum((q[k][i] - c[i]) ** 2 for i in range(3))
            if d2 < r2:
                empty = False
                break
        if empty:
            edges.update(itertools.combinations(quad, 2))
    return np.array(sorted(edges), dtype=int).reshape(-1, 2)


# --- finite differences ------------------------------------------------------


def finite_diff(loss_fn, params, indices, step=1e-5):
    """Central differences of ``loss_fn(params)`` w.r.t. flat ``indices``.

    ``params`` is a 1-D array and is restored after each probe.
    """
    theta = np.array(params, copy=True)
    out = np.empty(len(indices), dtype=theta.dtype)
    for k, i in enumerate(indices):
        orig = theta[i]
        theta[i] = orig + step
        plus = loss_fn(theta)
        theta[i] = orig - step
        minus = loss_fn(theta)
        theta[i] = orig
        out[k] = (plus - minus) / (2 * step)
    return out
