"""Incremental (Bowyer-Watson) 3D Delaunay tetrahedralization.

Landmark points taken from straight limbs are often collinear or coplanar, so
inputs are first perturbed by a deterministic jitter of ``1e-9`` times the
bounding-box diagonal.  Orientation and in-sphere predicates run in floating
point behind a conservative error filter and fall back to exact integer
arithmetic when the sign is not certain, which keeps the insertion consistent
on near-degenerate inputs.

The hull is handled with "ghost" tetrahedra that share a vertex at infinity,
so no bounding super-simplex is needed.
"""
import numpy as np

from .errors import DegenerateInput, TooFewPoints

JITTER_SCALE = 1e-9
INF = -1

# faces of tetrahedron (v0, v1, v2, v3): the face opposite vertex i
_FACE_IDX = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])


def jitter_points(points):
    """Deterministically perturb ``points`` by ``1e-9 * bbox diagonal``.

    The generator is seeded from the point count and indices only, so equal
    inputs always receive the same jitter.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got {pts.shape}")
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))) if len(pts) else 0.0
    if diag == 0.0:
        raise DegenerateInput("all points coincide")
    n = len(pts)
    rng = np.random.default_rng([0x5EED, n, n * (n - 1) // 2])
    return pts + rng.uniform(-1.0, 1.0, size=pts.shape) * (JITTER_SCALE * diag)


# --- predicates ------------------------------------------------------------


def _insphere_det(pa, pb, pc, pd):
    """Lifted 4x4 in-sphere determinant of points translated by the query point.

    Works component-wise on python ints or numpy float arrays.
    """
    adx, ady, adz = pa
    bdx, bdy, bdz = pb
    cdx, cdy, cdz = pc
    ddx, ddy, ddz = pd
    ab = adx * bdy - bdx * ady
    bc = bdx * cdy - cdx * bdy
    cd = cdx * ddy - ddx * cdy
    da = ddx * ady - adx * ddy
    ac = adx * cdy - cdx * ady
    bd = bdx * ddy - ddx * bdy
    abc = adz * bc - bdz * ac + cdz * ab
    bcd = bdz * cd - cdz * bd + ddz * bc
    cda = cdz * da + ddz * ac + adz * cd
    dab = ddz * ab + adz * bd + bdz * da
    alift = adx * adx + ady * ady + adz * adz
    blift = bdx * bdx + bdy * bdy + bdz * bdz
    clift = cdx * cdx + cdy * cdy + cdz * cdz
    dlift = ddx * ddx + ddy * ddy + ddz * ddz
    return (dlift * abc - clift * dab) + (blift * cda - alift * bcd)


def _insphere_perm(pa, pb, pc, pd):
    # same expansion with every sign positive: bounds |terms| for the error filter
    adx, ady, adz = pa
    bdx, bdy, bdz = pb
    cdx, cdy, cdz = pc
    ddx, ddy, ddz = pd
    ab = adx * bdy + bdx * ady
    bc = bdx * cdy + cdx * bdy
    cd = cdx * ddy + ddx * cdy
    da = ddx * ady + adx * ddy
    ac = adx * cdy + cdx * ady
    bd = bdx * ddy + ddx * bdy
    abc = adz * bc + bdz * ac + cdz * ab
    bcd = bdz * cd + cdz * bd + ddz * bc
    cda = cdz * da + ddz * ac + adz * cd
    dab = ddz * ab + adz * bd + bdz * da
    alift = adx * adx + ady * ady + adz * adz
    blift = bdx * bdx + bdy * bdy + bdz * bdz
    clift = cdx * cdx + cdy * cdy + cdz * cdz
    dlift = ddx * ddx + ddy * ddy + ddz * ddz
    return (dlift * abc + clift * dab) + (blift * cda + alift * bcd)


class _Exact:
    """Exact integer copies of the coordinates (all scaled by one power of two)."""

    def __init__(self, pts):
        ratios = [float(c).as_integer_ratio() for c in pts.ravel()]
        shift = max(d.bit_length() - 1 for _, d in ratios)
        ints = [num << (shift - (d.bit_length() - 1)) for num, d in ratios]
        self.p = [tuple(ints[3 * i: 3 * i + 3]) for i in range(len(pts))]

    def orient(self, a, b, c, d):
        pa, pb, pc, pd = self.p[a], self.p[b], self.p[c], self.p[d]
        b0, b1, b2 = pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]
        c0, c1, c2 = pc[0] - pa[0], pc[1] - pa[1], pc[2] - pa[2]
        d0, d1, d2 = pd[0] - pa[0], pd[1] - pa[1], pd[2] - pa[2]
        det = b0 * (c1 * d2 - c2 * d1) - b1 * (c0 * d2 - c2 * d0) + b2 * (c0 * d1 - c1 * d0)
        return (det > 0) - (det < 0)

    def insphere(self, a, b, c, d, e):
        pe = self.p[e]
        rel = []
        for v in (a, b, c, d):
            pv = self.p[v]
            rel.append((pv[0] - pe[0], pv[1] - pe[1], pv[2] - pe[2]))
        det = _insphere_det(*rel)
        return (det > 0) - (det < 0)


def _orient_float(P, a, b, c, d):
    """Sign of det[b-a, c-a, d-a] for index arrays; 0 where uncertain."""
    u, v, w = P[b] - P[a], P[c] - P[a], P[d] - P[a]
    det = (u[:, 0] * (v[:, 1] * w[:, 2] - v[:, 2] * w[:, 1])
           - u[:, 1] * (v[:, 0] * w[:, 2] - v[:, 2] * w[:, 0])
           + u[:, 2] * (v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]))
    au, av, aw = np.abs(u), np.abs(v), np.abs(w)
    perm = (au[:, 0] * (av[:, 1] * aw[:, 2] + av[:, 2] * aw[:, 1])
            + au[:, 1] * (av[:, 0] * aw[:, 2] + av[:, 2] * aw[:, 0])
            + au[:, 2] * (av[:, 0] * aw[:, 1] + av[:, 1] * aw[:, 0]))
    sign = np.sign(det).astype(int)
    sign[np.abs(det) <= 1e-14 * perm] = 0
    return sign


def _insphere_float(P, a, b, c, d, e):
    """Sign of the lifted in-sphere determinant; 0 where uncertain.

    For a positively oriented tetrahedron (a, b, c, d) the sign is negative
    when ``e`` lies strictly inside the circumsphere.
    """
    rel = [(P[v] - P[e]).T for v in (a, b, c, d)]
    det = _insphere_det(*rel)
    perm = _insphere_perm(*[np.abs(r) for r in rel])
    sign = np.sign(det).astype(int)
    sign[np.abs(det) <= 1e-13 * perm] = 0
    return sign


# --- tetrahedralization ------------------------------------------------------


def _initial_simplex(P, ex):
    n = len(P)
    i0 = 0
    i1 = next((i for i in range(1, n) if np.any(P[i] != P[i0])), None)
    if i1 is None:
        raise DegenerateInput("all points coincide")
    i2 = None
    for i in range(n):
        if i in (i0, i1):
            continue
        cr = np.cross(np.array(ex.p[i1], dtype=object) - np.array(ex.p[i0], dtype=object),
                      np.array(ex.p[i], dtype=object) - np.array(ex.p[i0], dtype=object))
        if any(c != 0 for c in cr):
            i2 = i
            break
    if i2 is None:
        raise DegenerateInput("points are collinear")
    for i in range(n):
        if i in (i0, i1, i2):
            continue
        s = ex.orient(i0, i1, i2, i)
        if s != 0:
            return (i0, i1, i2, i) if s > 0 else (i1, i0, i2, i)
    raise DegenerateInput("points are coplanar")


def _ghosts_of(tet):
    """Ghost tetrahedra covering the four hull faces of a single positive tet."""
    out = []
    for i in range(4):
        g = list(tet)
        g[i] = INF
        # swap two finite vertices so infinity sits on the outer side
        j, k = [x for x in range(4) if x != i][:2]
        g[j], g[k] = g[k], g[j]
        out.append(tuple(g))
    return out


def tetrahedralize(points):
    """Delaunay tetrahedra of (already jittered) ``points`` as an ``(m, 4)`` array."""
    P = np.asarray(points, dtype=float)
    n = len(P)
    if n < 4:
        raise TooFewPoints(f"need at least 4 points, got {n}")
    ex = _Exact(P)
    first = _initial_simplex(P, ex)
    tets = np.array([first] + _ghosts_of(first), dtype=int)

    for p in range(n):
        if p in first:
            continue
        conflict = _conflicts(P, ex, tets, p)
        if not conflict.any():
            raise DegenerateInput(f"point {p} could not be inserted")
        ct = tets[conflict]
        faces = np.sort(ct[:, _FACE_IDX], axis=2) + 1  # shift INF to 0
        base = n + 1
        keys = (faces[..., 0] * base + faces[..., 1]) * base + faces[..., 2]
        _, inverse, counts = np.unique(keys.ravel(), return_inverse=True, return_counts=True)
        boundary = np.flatnonzero(counts[inverse] == 1)
        owner, opposite = np.divmod(boundary, 4)
        new = ct[owner].copy()
        new[np.arange(len(new)), opposite] = p
        tets = np.vstack([tets[~conflict], new])
    return tets[np.all(tets != INF, axis=1)]


def _conflicts(P, ex, tets, p):
    finite = np.all(tets != INF, axis=1)
    conflict = np.zeros(len(tets), dtype=bool)

    fi = np.flatnonzero(finite)
    if fi.size:
        T = tets[fi]
        pe = np.full(len(fi), p)
        s = _insphere_float(P, T[:, 0], T[:, 1], T[:, 2], T[:, 3], pe)
        for k in np.flatnonzero(s == 0):
            s[k] = ex.insphere(*(int(v) for v in T[k]), p)
        conflict[fi] = s < 0

    gi = np.flatnonzero(~finite)
    if gi.size:
        G = tets[gi].copy()
        G[G == INF] = p
        s = _orient_float(P, G[:, 0], G[:, 1], G[:, 2], G[:, 3])
        for k in np.flatnonzero(s == 0):
            s[k] = ex.orient(*(int(v) for v in G[k]))
        conflict[gi] = s > 0
        for k in np.flatnonzero(s == 0):
            # coplanar with a hull face: follow the finite neighbour's verdict
            face = sorted(int(v) for v in tets[gi[k]] if v != INF)
            for t in fi:
                if all(v in tets[t] for v in face):
                    conflict[gi[k]] = conflict[t]
                    break
    return conflict


def tetra_edges(tets):
    t = np.sort(np.asarray(tets, dtype=int).reshape(-1, 4), axis=1)
    pairs = t[:, [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]].reshape(-1, 2)
    return np.unique(pairs, axis=0)


def delaunay_edges(points):
    """Edge set of the Delaunay tetrahedralization of ``points`` (after jitter).

    Returns a lexicographically sorted ``(m, 2)`` integer array with ``i < j``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got {pts.shape}")
    if len(pts) < 4:
        raise TooFewPoints(f"need at least 4 points, got {len(pts)}")
    return tetra_edges(tetrahedralize(jitter_points(pts)))
