import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from mesher.errors import DegenerateTriangleError, GeometryError

# Shewchuk's static error bounds for the floating-point filter stage.
_EPSILON = 2.0**-53
CCW_ERRBOUND_A = (3.0 + 16.0 * _EPSILON) * _EPSILON
ICC_ERRBOUND_A = (10.0 + 96.0 * _EPSILON) * _EPSILON

PointLike = Sequence[float]


class Point2(NamedTuple):
    """A point in the plane, in model units."""

    x: float
    y: float


class Sign(IntEnum):
    """Outcome of an exact geometric predicate."""

    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


@dataclass(frozen=True)
class TriMetrics:
    """Shape measures of a single triangle; angles in radians."""

    area: float
    longest_edge: float
    inradius: float
    circumradius: float
    quality: float
    min_angle: float


def _sign(value: float | Fraction) -> Sign:
    """Map a number to its Sign."""
    if value > 0:
        return Sign.POSITIVE
    if value < 0:
        return Sign.NEGATIVE
    return Sign.ZERO


def _exact(*values: float) -> list[Fraction]:
    """Exact rational copies of the given floats."""
    return [Fraction(float(v)) for v in values]


def orient2d(a: PointLike, b: PointLike, c: PointLike) -> Sign:
    """
    Sign of the signed area of (a, b, c): POSITIVE for a counterclockwise turn.
    A floating-point filter decides the easy cases; the rest is evaluated in
    exact rational arithmetic, so the answer is correct for all finite inputs.
    """
    detleft = (a[0] - c[0]) * (b[1] - c[1])
    detright = (a[1] - c[1]) * (b[0] - c[0])
    det = detleft - detright
    errbound = CCW_ERRBOUND_A * (abs(detleft) + abs(detright))
    if det > errbound:
        return Sign.POSITIVE
    if -det > errbound:
        return Sign.NEGATIVE
    ax, ay, bx, by, cx, cy = _exact(a[0], a[1], b[0], b[1], c[0], c[1])
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def in_circumcircle(a: PointLike, b: PointLike, c: PointLike, d: PointLike) -> Sign:
    """
    POSITIVE iff d lies strictly inside the circumcircle of the counterclockwise
    triangle (a, b, c), ZERO if on it. Undefined for clockwise input.
    """
    adx = a[0] - d[0]
    ady = a[1] - d[1]
    bdx = b[0] - d[0]
    bdy = b[1] - d[1]
    cdx = c[0] - d[0]
    cdy = c[1] - d[1]

    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy

    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    errbound = ICC_ERRBOUND_A * permanent
    if det > errbound:
        return Sign.POSITIVE
    if -det > errbound:
        return Sign.NEGATIVE

    ax, ay, bx, by, cx, cy, dx, dy = _exact(a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1])
    ex, ey = ax - dx, ay - dy
    fx, fy = bx - dx, by - dy
    gx, gy = cx - dx, cy - dy
    exact = (
        (ex * ex + ey * ey) * (fx * gy - gx * fy)
        + (fx * fx + fy * fy) * (gx * ey - ex * gy)
        + (gx * gx + gy * gy) * (ex * fy - fx * ey)
    )
    return _sign(exact)


def _angle_at(p: PointLike, q: PointLike, r: PointLike) -> float:
    """Angle at p between the rays to q and r."""
    ux, uy = q[0] - p[0], q[1] - p[1]
    vx, vy = r[0] - p[0], r[1] - p[1]
    return math.atan2(abs(ux * vy - uy * vx), ux * vx + uy * vy)


def tri_metrics(a: PointLike, b: PointLike, c: PointLike) -> TriMetrics:
    """Area, longest edge, in/circumradius, quality and minimum angle of a triangle."""
    if orient2d(a, b, c) == Sign.ZERO:
        raise DegenerateTriangleError(f"triangle {tuple(a)}, {tuple(b)}, {tuple(c)} has zero area")
    ab = math.hypot(b[0] - a[0], b[1] - a[1])
    bc = math.hypot(c[0] - b[0], c[1] - b[1])
    ca = math.hypot(a[0] - c[0], a[1] - c[1])
    area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    inradius = area / (0.5 * (ab + bc + ca))
    circumradius = ab * bc * ca / (4.0 * area)
    return TriMetrics(
        area=area,
        longest_edge=max(ab, bc, ca),
        inradius=inradius,
        circumradius=circumradius,
        quality=min(1.0, 2.0 * inradius / circumradius),
        min_angle=min(_angle_at(a, b, c), _angle_at(b, c, a), _angle_at(c, a, b)),
    )


def polygon_area(loop: Sequence[PointLike]) -> float:
    """Signed shoelace area; positive for counterclockwise loops."""
    pts = list(loop)
    if len(pts) < 3:
        raise GeometryError(f"a polygon needs at least 3 points, got {len(pts)}")
    terms = (
        pts[i][0] * pts[(i + 1) % len(pts)][1] - pts[(i + 1) % len(pts)][0] * pts[i][1]
        for i in range(len(pts))
    )
    return 0.5 * math.fsum(terms)


def _same_point(p: PointLike, q: PointLike) -> bool:
    """Exact coordinate equality."""
    return p[0] == q[0] and p[1] == q[1]


def _within_box(a: PointLike, b: PointLike, p: PointLike) -> bool:
    """True iff p lies in the closed bounding box of a and b."""
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(
        a[1], b[1]
    )


def on_segment(a: PointLike, b: PointLike, p: PointLike) -> bool:
    """True iff p lies on the closed segment ab (exact)."""
    return orient2d(a, b, p) == Sign.ZERO and _within_box(a, b, p)


def inside_segment(a: PointLike, b: PointLike, p: PointLike) -> bool:
    """True iff p lies on segment ab and is neither endpoint (exact)."""
    return not _same_point(p, a) and not _same_point(p, b) and on_segment(a, b, p)


def segments_intersect(
    p1: PointLike,
    p2: PointLike,
    q1: PointLike,
    q2: PointLike,
    ignore_shared_endpoint: bool = True,
) -> bool:
    """
    True iff the closed segments p1p2 and q1q2 have a common point. With
    ignore_shared_endpoint, a single endpoint the two segments declare in common
    does not count, unless they also overlap beyond it.
    """
    if _same_point(p1, p2) or _same_point(q1, q2):
        raise GeometryError("segments_intersect needs segments of nonzero length")

    if ignore_shared_endpoint:
        shared = [(p, q) for p in (p1, p2) for q in (q1, q2) if _same_point(p, q)]
        if len(shared) >= 2:
            return True
        if len(shared) == 1:
            s = shared[0][0]
            p_other = p2 if _same_point(s, p1) else p1
            q_other = q2 if _same_point(s, q1) else q1
            if orient2d(s, p_other, q_other) != Sign.ZERO:
                return False
            return _within_box(s, p_other, q_other) or _within_box(s, q_other, p_other)

    o1 = orient2d(p1, p2, q1)
    o2 = orient2d(p1, p2, q2)
    o3 = orient2d(q1, q2, p1)
    o4 = orient2d(q1, q2, p2)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if o1 == Sign.ZERO and _within_box(p1, p2, q1):
        return True
    if o2 == Sign.ZERO and _within_box(p1, p2, q2):
        return True
    if o3 == Sign.ZERO and _within_box(q1, q2, p1):
        return True
    return o4 == Sign.ZERO and _within_box(q1, q2, p2)


def point_in_polygon(p: PointLike, loop: Sequence[PointLike]) -> bool:
    """True iff p is strictly inside the closed loop; points on the boundary are outside."""
    inside = False
    n = len(loop)
    for i in range(n):
        a = loop[i]
        b = loop[(i + 1) % n]
        if on_segment(a, b, p):
            return False
        if (a[1] > p[1]) != (b[1] > p[1]):
            side = orient2d(a, b, p)
            upward = b[1] > a[1]
            if (upward and side == Sign.POSITIVE) or (not upward and side == Sign.NEGATIVE):
                inside = not inside
    return inside


def convex_hull(points: Sequence[PointLike]) -> list[int]:
    """
    Indices of the convex hull in counterclockwise order, starting at the
    lexicographically smallest point. Points on hull edges are kept.
    """
    order = sorted(range(len(points)), key=lambda i: (points[i][0], points[i][1]))

    def chain(indices: list[int]) -> list[int]:
        """One monotone hull chain over the given point order."""
        hull: list[int] = []
        for i in indices:
            while (
                len(hull) >= 2
                and orient2d(points[hull[-2]], points[hull[-1]], points[i]) == Sign.NEGATIVE
            ):
                hull.pop()
            hull.append(i)
        return hull

    lower = chain(order)
    upper = chain(order[::-1])
    return lower[:-1] + upper[:-1]


def signed_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed area of every triangle (positive when counterclockwise)."""
    a = points[triangles[:, 0]]
    b = points[triangles[:, 1]]
    c = points[triangles[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    return 0.5 * cross


def edge_lengths(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """(m, 3) array; column k is the length of the edge opposite vertex k."""
    lengths = np.empty(triangles.shape, dtype=float)
    for k in range(3):
        p = points[triangles[:, (k + 1) % 3]]
        q = points[triangles[:, (k + 2) % 3]]
        lengths[:, k] = np.hypot(q[:, 0] - p[:, 0], q[:, 1] - p[:, 1])
    return lengths


def triangle_qualities(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """2 * inradius / circumradius per triangle; degenerate triangles report 0."""
    area = np.abs(signed_areas(points, triangles))
    lengths = edge_lengths(points, triangles)
    semi = 0.5 * lengths.sum(axis=1)
    prod = lengths.prod(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        quality = 8.0 * area * area / (semi * prod)
    return np.clip(np.nan_to_num(quality, nan=0.0), 0.0, 1.0)


def triangle_min_angles(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Smallest interior angle (radians) per triangle, via atan2 of cross and dot."""
    angles = np.empty(triangles.shape, dtype=float)
    for k in range(3):
        p = points[triangles[:, k]]
        u = points[triangles[:, (k + 1) % 3]] - p
        v = points[triangles[:, (k + 2) % 3]] - p
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        dot = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]
        angles[:, k] = np.arctan2(cross, dot)
    return angles.min(axis=1)


def orient_signs(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Vectorised orient2d over triangle rows; uncertain rows are settled exactly."""
    a = points[triangles[:, 0]]
    b = points[triangles[:, 1]]
    c = points[triangles[:, 2]]
    detleft = (a[:, 0] - c[:, 0]) * (b[:, 1] - c[:, 1])
    detright = (a[:, 1] - c[:, 1]) * (b[:, 0] - c[:, 0])
    det = detleft - detright
    errbound = CCW_ERRBOUND_A * (np.abs(detleft) + np.abs(detright))
    signs = np.where(det > errbound, 1, np.where(-det > errbound, -1, 0)).astype(np.int8)
    for row in np.flatnonzero(signs == 0):
        signs[row] = int(orient2d(a[row], b[row], c[row]))
    return signs
