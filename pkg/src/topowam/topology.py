"""Linking integrals, Writhe matrices, Laplacian coordinates and total linking.

Curves are polylines given as ``(n + 1, 3)`` arrays of points in meters; a
polyline with ``n + 1`` points has ``n`` directed segments.  All functions are
pure and operate on plain numpy arrays.

The linking value of two straight segments is evaluated in closed form as the
signed area of the spherical quadrilateral swept by the unit vectors joining
the two segments (four signed vertex-angle terms), divided by ``4 pi``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoincidentPoints,
    DegenerateSegment,
    IntersectingSegments,
    IsolatedVertex,
    ShapeMismatch,
)

MIN_SEGMENT_LENGTH = 1e-9
MIN_SEGMENT_DISTANCE = 1e-9
# distance below which in-episode evaluations are flagged as saturated
SATURATION_DISTANCE = 1e-6

FOUR_PI = 4.0 * np.pi

UPRIGHT_SHAPE = (20, 14)
HORIZONTAL_SHAPE = (15, 14)
ROBOT_SEGMENTS = 7
HUMANOID_SEGMENTS = 10
HALF_SEGMENTS = 5


def as_polyline(points, name="curve"):
    """Validate and return ``points`` as a float ``(n + 1, 3)`` array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
        raise ShapeMismatch(f"{name}: expected (n+1, 3) points with n >= 1, got {pts.shape}")
    lengths = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    bad = np.flatnonzero(lengths <= MIN_SEGMENT_LENGTH)
    if bad.size:
        raise DegenerateSegment(f"{name}: segment(s) {bad.tolist()} shorter than {MIN_SEGMENT_LENGTH} m")
    return pts


def segment_distance(a0, a1, b0, b1):
    """Minimum distance between segments ``a0-a1`` and ``b0-b1``.

    Broadcasts over leading dimensions; inputs have shape ``(..., 3)``.
    """
    a0, a1, b0, b1 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a0, a1, b0, b1)))
    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    a = np.einsum("...i,...i", d1, d1)
    e = np.einsum("...i,...i", d2, d2)
    f = np.einsum("...i,...i", d2, r)
    c = np.einsum("...i,...i", d1, r)
    b = np.einsum("...i,...i", d1, d2)
    denom = a * e - b * b
    safe_a = np.where(a > 0, a, 1.0)
    safe_e = np.where(e > 0, e, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
    t = (b * s + f) / safe_e
    s = np.where(t < 0.0, np.clip(-c / safe_a, 0.0, 1.0), np.where(t > 1.0, np.clip((b - c) / safe_a, 0.0, 1.0), s))
    t = np.clip(t, 0.0, 1.0)
    diff = (a0 + d1 * s[..., None]) - (b0 + d2 * t[..., None])
    return np.linalg.norm(diff, axis=-1)


def _angle_term(u, v):
    # arcsin(u_hat . v_hat) without normalising; zero vectors give 0
    dot = np.einsum("...i,...i", u, v)
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(dot, cross)


def _gli_closed(a0, a1, b0, b1):
    """Closed-form linking value of segment pairs, broadcasting over ``(..., 3)``."""
    r00 = b0 - a0
    r01 = b1 - a0
    r10 = b0 - a1
    r11 = b1 - a1
    n1 = np.cross(r00, r01)
    n2 = np.cross(r01, r11)
    n3 = np.cross(r11, r10)
    n4 = np.cross(r10, r00)
    area = _angle_term(n1, n2) + _angle_term(n2, n3) + _angle_term(n3, n4) + _angle_term(n4, n1)
    orient = np.einsum("...i,...i", np.cross(b1 - b0, a1 - a0), r00)
    return np.sign(orient) * area / FOUR_PI


def segment_gli(a0, a1, b0, b1):
    """Gaussian linking integral of two straight segments.

    Raises :class:`DegenerateSegment` for segments shorter than 1e-9 m and
    :class:`IntersectingSegments` when the segments come within 1e-9 m.
    """
    a0, a1, b0, b1 = (np.asarray(x, dtype=float).reshape(3) for x in (a0, a1, b0, b1))
    if np.linalg.norm(a1 - a0) <= MIN_SEGMENT_LENGTH or np.linalg.norm(b1 - b0) <= MIN_SEGMENT_LENGTH:
        raise DegenerateSegment("segment shorter than 1e-9 m")
    if segment_distance(a0, a1, b0, b1) <= MIN_SEGMENT_DISTANCE:
        raise IntersectingSegments("segments intersect (distance <= 1e-9 m)")
    return float(_gli_closed(a0, a1, b0, b1))


def writhe_entries(c1, c2, strict=True):
    """Raw segment-pair linking values of two point arrays.

    Returns ``(entries, saturated)``.  With ``strict`` the call raises on
    segment pairs closer than 1e-9 m; otherwise such pairs (and any closer
    than 1e-6 m) are evaluated anyway and reported through ``saturated``.
    """
    a0 = c1[:-1, None, :]
    a1 = c1[1:, None, :]
    b0 = c2[None, :-1, :]
    b1 = c2[None, 1:, :]
    dist = segment_distance(a0, a1, b0, b1)
    if strict:
        hits = np.argwhere(dist <= MIN_SEGMENT_DISTANCE)
        if hits.size:
            i, j = hits[0]
            raise IntersectingSegments(
                f"segment {i} of first curve and segment {j} of second curve intersect",
                indices=(int(i), int(j)),
            )
        saturated = False
    else:
        saturated = bool(np.any(dist < SATURATION_DISTANCE))
    return _gli_closed(a0, a1, b0, b1), saturated


@dataclass
class WritheMatrix:
    """Segment-pair linking values; rows index segments of the row curve."""

    entries: np.ndarray
    row_curve_id: str = "c1"
    col_curve_id: str = "c2"

    @property
    def shape(self):
        return self.entries.shape

    def total(self):
        return float(self.entries.sum())

    def transpose(self):
        return WritheMatrix(self.entries.T.copy(), self.col_curve_id, self.row_curve_id)


def writhe_matrix(c1, c2, row_id="c1", col_id="c2"):
    p1 = as_polyline(c1, row_id)
    p2 = as_polyline(c2, col_id)
    entries, _ = writhe_entries(p1, p2, strict=True)
    return WritheMatrix(entries, row_id, col_id)


def curve_gli(c1, c2):
    """Linking integral of two polylines.

    Evaluated pair by pair and summed with ``math.fsum``, independently of the
    vectorised Writhe matrix path.
    """
    p1 = as_polyline(c1, "c1")
    p2 = as_polyline(c2, "c2")
    return math.fsum(segment_gli(p1[i], p1[i + 1], p2[j], p2[j + 1])
                     for i in range(len(p1) - 1) for j in range(len(p2) - 1))


# --- scene-level combinations -------------------------------------------------


def split_halves(curve):
    """Upper and lower halves of a 10-segment humanoid curve (shared middle point)."""
    pts = np.asarray(curve, dtype=float)
    if pts.shape != (HUMANOID_SEGMENTS + 1, 3):
        raise ShapeMismatch(f"expected an 11-point curve, got {pts.shape}")
    return pts[: HALF_SEGMENTS + 1], pts[HALF_SEGMENTS:]


def _require(curves, name, n_segments):
    try:
        pts = np.asarray(curves[name], dtype=float)
    except KeyError:
        raise ShapeMismatch(f"missing curve {name!r}") from None
    if pts.shape != (n_segments + 1, 3):
        raise ShapeMismatch(f"curve {name!r} must have {n_segments} segments, got shape {pts.shape}")
    return pts


def upright_blocks(robot, humanoid):
    """Curve pairs of the upright layout, in row-major block order."""
    r_r = _require(robot, "r_r", ROBOT_SEGMENTS)
    r_l = _require(robot, "r_l", ROBOT_SEGMENTS)
    h_r = _require(humanoid, "h_r", HUMANOID_SEGMENTS)
    h_l = _require(humanoid, "h_l", HUMANOID_SEGMENTS)
    h_arm = _require(humanoid, "h_arm", HUMANOID_SEGMENTS)
    return [[(h_r, r_r), (h_l, r_l)], [(h_arm, r_r), (h_arm, r_l)]]


def horizontal_blocks(robot, humanoid):
    """Curve pairs of the horizontal layout (half torso curves vs. arms)."""
    r_r = _require(robot, "r_r", ROBOT_SEGMENTS)
    r_l = _require(robot, "r_l", ROBOT_SEGMENTS)
    rows = []
    for name in ("h_r", "h_c", "h_l"):
        upper, lower = split_halves(_require(humanoid, name, HUMANOID_SEGMENTS))
        rows.append([(upper, r_r), (lower, r_l)])
    return rows


def _blocks(robot, humanoid, scenario):
    if scenario == "upright":
        return upright_blocks(robot, humanoid)
    if scenario == "horizontal":
        return horizontal_blocks(robot, humanoid)
    raise ValueError(f"unknown scenario {scenario!r}")


def scene_linking(robot, humanoid, scenario, strict=True):
    """Combined Writhe matrix and total linking of a scene in one pass.

    Returns ``(matrix, total, saturated)`` where ``total`` is the sum of the
    absolute block sums (each block sum is a curve-pair linking integral).
    """
    rows = []
    total = 0.0
    saturated = False
    for block_row in _blocks(robot, humanoid, scenario):
        mats = []
        for hum, rob in block_row:
            w, sat = writhe_entries(hum, rob, strict=strict)
            saturated |= sat
            total += abs(w.sum())
            mats.append(w)
        rows.append(np.hstack(mats))
    return np.vstack(rows), total, saturated


def combined_writhe_upright(robot, humanoid):
    """20x14 matrix ``[[W(h_r, r_r), W(h_l, r_l)], [W(h_arm, r_r), W(h_arm, r_l)]]``."""
    return scene_linking(robot, humanoid, "upright")[0]


def combined_writhe_horizontal(robot, humanoid):
    """15x14 matrix of upper/lower torso halves against right/left arm."""
    return scene_linking(robot, humanoid, "horizontal")[0]


def total_linking(robot, humanoid, scenario):
    """Sum of absolute curve-pair linking values for ``scenario``."""
    return scene_linking(robot, humanoid, scenario)[1]


# --- Laplacian coordinates ----------------------------------------------------


@dataclass
class LaplacianCoords:
    """Per-vertex offsets from the inverse-distance-weighted neighbour mean.

    ``weights`` is a dense row-stochastic ``(n, n)`` matrix whose nonzero
    entries in row ``i`` are the neighbour weights of vertex ``i``.
    """

    deltas: np.ndarray
    weights: np.ndarray = field(repr=False)

    def neighbor_weights(self, i):
        row = self.weights[i]
        idx = np.flatnonzero(row)
        return dict(zip(idx.tolist(), row[idx].tolist()))


def laplacian_weights(points, edges):
    pts = np.asarray(points, dtype=float)
    e = np.asarray(edges, dtype=int).reshape(-1, 2)
    n = len(pts)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise ShapeMismatch("edge index out of range")
    lengths = np.linalg.norm(pts[e[:, 0]] - pts[e[:, 1]], axis=1)
    if np.any(lengths < MIN_SEGMENT_LENGTH):
        k = int(np.argmin(lengths))
        raise CoincidentPoints(f"edge {tuple(e[k])} has length {lengths[k]:.3g} m")
    inv = np.zeros((n, n))
    inv[e[:, 0], e[:, 1]] = 1.0 / lengths
    inv[e[:, 1], e[:, 0]] = 1.0 / lengths
    norm = inv.sum(axis=1)
    isolated = np.flatnonzero(norm == 0)
    if isolated.size:
        raise IsolatedVertex(f"vertices without neighbours: {isolated.tolist()}")
    return inv / norm[:, None]


def laplacian_coords(points, edges):
    pts = np.asarray(points, dtype=float)
    w = laplacian_weights(pts, edges)
    return LaplacianCoords(pts - w @ pts, w)
