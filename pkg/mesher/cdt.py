import logging
import math
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from mesher.errors import ConstraintError, DelaunayError, PolygonError
from mesher.geometry import (
    Point2,
    PointLike,
    Sign,
    convex_hull,
    in_circumcircle,
    inside_segment,
    orient2d,
    point_in_polygon,
    polygon_area,
    segments_intersect,
)
from mesher.halfedge import Triangulation
from mesher.mesh import BOUNDARY, Edge, PolygonDomain, TriMesh, build_adjacency, edge_key

logger = logging.getLogger(__name__)

# Half-width of the helper triangle, in multiples of the input extent.
SUPER_TRIANGLE_SCALE = 20.0


@dataclass
class PolygonCheck:
    """Normalised domain (outer CCW, holes CW) plus the defects found."""

    domain: PolygonDomain
    defects: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """True when no defect was found."""
        return not self.defects


def _clean_loop(loop: Sequence[PointLike], name: str, defects: list[str]) -> list[Point2]:
    """Drop non-finite points and merge consecutive duplicates, closing point included."""
    points = []
    for p in loop:
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            defects.append(f"{name}: non-finite coordinate {tuple(p)}")
            continue
        points.append(Point2(x, y))
    merged: list[Point2] = []
    for p in points:
        if not merged or merged[-1] != p:
            merged.append(p)
    while len(merged) > 1 and merged[0] == merged[-1]:
        merged.pop()
    if len(merged) < len(points):
        logger.warning(
            "%s: merged %d consecutive duplicate corner points", name, len(points) - len(merged)
        )
    return merged


def _loop_edges(loop: list[Point2]) -> list[tuple[int, Point2, Point2]]:
    """(index, start, end) for every edge of a closed loop."""
    return [(j, loop[j], loop[(j + 1) % len(loop)]) for j in range(len(loop))]


def validate_polygon(domain: PolygonDomain) -> PolygonCheck:
    """
    Check the outer loop and holes for size, duplicates, self-intersections and
    nesting; return the domain with outer loop CCW and holes CW.
    """
    defects: list[str] = []
    outer = _clean_loop(domain.outer, "outer", defects)
    holes = [_clean_loop(h, f"hole {i}", defects) for i, h in enumerate(domain.holes)]
    named = [("outer", outer)] + [(f"hole {i}", h) for i, h in enumerate(holes)]
    for name, loop in named:
        if len(loop) < 3:
            defects.append(f"{name}: fewer than 3 distinct points")
    if defects:
        return PolygonCheck(PolygonDomain(outer, holes), defects)

    seen: dict[Point2, str] = {}
    for name, loop in named:
        for p in loop:
            if p in seen:
                defects.append(f"duplicate vertex {tuple(p)} in {name} (also in {seen[p]})")
            else:
                seen[p] = name

    segments = [(name, len(loop), j, p, q) for name, loop in named for j, p, q in _loop_edges(loop)]
    box = np.array(
        [
            (min(p[0], q[0]), max(p[0], q[0]), min(p[1], q[1]), max(p[1], q[1]))
            for *_, p, q in segments
        ]
    )
    crossing = False
    for i, (name_i, n_i, j_i, p_i, q_i) in enumerate(segments):
        rest = box[i + 1 :]
        overlap = (
            (rest[:, 0] <= box[i, 1])
            & (rest[:, 1] >= box[i, 0])
            & (rest[:, 2] <= box[i, 3])
            & (rest[:, 3] >= box[i, 2])
        )
        for k in (np.flatnonzero(overlap) + i + 1).tolist():
            name_k, n_k, j_k, p_k, q_k = segments[k]
            if segments_intersect(p_i, q_i, p_k, q_k):
                crossing = True
                defects.append(
                    f"self-intersection: {name_i} edge {(j_i, (j_i + 1) % n_i)} "
                    f"meets {name_k} edge {(j_k, (j_k + 1) % n_k)}"
                )

    if not crossing:
        for name, loop in named:
            if polygon_area(loop) == 0.0:
                defects.append(f"{name}: zero area")
        for i, hole in enumerate(holes):
            if not all(point_in_polygon(p, outer) for p in hole):
                defects.append(f"hole {i} is not inside the outer loop")
        for i, first in enumerate(holes):
            for j in range(i + 1, len(holes)):
                second = holes[j]
                if point_in_polygon(second[0], first) or point_in_polygon(first[0], second):
                    defects.append(f"hole {i} and hole {j} overlap")

    if not defects:
        if polygon_area(outer) < 0:
            outer = outer[::-1]
        holes = [h[::-1] if polygon_area(h) > 0 else h for h in holes]
    return PolygonCheck(PolygonDomain(outer, holes), defects)


def _locate(tri: Triangulation, p: PointLike, start: int) -> int:
    """Visibility walk from `start` to a triangle containing p."""
    pts = tri.points
    tid = start if start in tri.triangles else next(iter(tri.triangles))
    for _ in range(4 * len(tri.triangles) + 16):
        a, b, c = tri.triangles[tid]
        for u, v in ((a, b), (b, c), (c, a)):
            if orient2d(pts[u], pts[v], p) == Sign.NEGATIVE:
                nxt = tri.owner(v, u)
                if nxt is None:
                    raise DelaunayError(f"point {tuple(p)} lies outside the helper triangle")
                tid = nxt
                break
        else:
            return tid
    logger.debug("Walk did not settle; scanning all triangles for %s", tuple(p))
    for tid, (a, b, c) in tri.triangles.items():
        if all(
            orient2d(pts[u], pts[v], p) != Sign.NEGATIVE for u, v in ((a, b), (b, c), (c, a))
        ):
            return tid
    raise DelaunayError(f"point {tuple(p)} is not covered by the triangulation")


def _insert_vertex(tri: Triangulation, i: int, start: int) -> int:
    """Bowyer-Watson insertion of vertex i; returns the id of a new triangle."""
    pts = tri.points
    p = pts[i]
    first = _locate(tri, p, start)
    cavity = {first}
    stack = [first]
    while stack:
        a, b, c = tri.triangles[stack.pop()]
        for u, v in ((a, b), (b, c), (c, a)):
            nb = tri.owner(v, u)
            if nb is None or nb in cavity:
                continue
            x, y, z = tri.triangles[nb]
            if in_circumcircle(pts[x], pts[y], pts[z], p) == Sign.POSITIVE:
                cavity.add(nb)
                stack.append(nb)
    rim = []
    for tid in sorted(cavity):
        a, b, c = tri.triangles[tid]
        for u, v in ((a, b), (b, c), (c, a)):
            if tri.owner(v, u) not in cavity:
                rim.append((u, v))
    for tid in sorted(cavity):
        tri.remove(tid)
    last = start
    for u, v in rim:
        last = tri.add(u, v, i)
    return last


def _fill_pseudo_polygon(tri: Triangulation, p: int, q: int, chain: list[int]) -> None:
    """
    Triangulate the region left of p->q bounded by `chain` (ordered from q
    back to p), choosing apexes with empty circumcircles.
    """
    pts = tri.points
    stack = [(p, q, chain)]
    while stack:
        p, q, chain = stack.pop()
        if not chain:
            continue
        best = 0
        for i in range(1, len(chain)):
            side = in_circumcircle(pts[p], pts[q], pts[chain[best]], pts[chain[i]])
            if side == Sign.POSITIVE or (side == Sign.ZERO and chain[i] < chain[best]):
                best = i
        c = chain[best]
        tri.add(p, q, c)
        stack.append((c, q, chain[:best]))
        stack.append((p, c, chain[best + 1 :]))


def _insert_segment(tri: Triangulation, a: int, b: int) -> None:
    """Recover edge a-b by removing the triangles it crosses and refilling both sides."""
    pts = tri.points
    start = None
    for tid in sorted(tri.incident[a]):
        x, y, z = tri.triangles[tid]
        u, v = (y, z) if x == a else (z, x) if y == a else (x, y)
        for w in (u, v):
            if inside_segment(pts[a], pts[b], pts[w]):
                raise ConstraintError(f"vertex {w} lies on constraint {(a, b)}")
        if (
            orient2d(pts[a], pts[u], pts[b]) == Sign.POSITIVE
            and orient2d(pts[a], pts[v], pts[b]) == Sign.NEGATIVE
        ):
            start = (tid, u, v)
            break
    if start is None:
        raise ConstraintError(f"constraint {(a, b)} leaves the triangulated region")

    tid, right_end, left_end = start
    crossed = [tid]
    left = [left_end]
    right = [right_end]
    while True:
        if tri.is_constrained(right_end, left_end):
            raise ConstraintError(
                f"constraint {(a, b)} crosses constrained edge {edge_key(right_end, left_end)}"
            )
        nxt = tri.owner(left_end, right_end)
        if nxt is None:
            raise ConstraintError(f"constraint {(a, b)} leaves the triangulated region")
        crossed.append(nxt)
        w = tri.apex(left_end, right_end)
        assert w is not None
        if w == b:
            break
        side = orient2d(pts[a], pts[b], pts[w])
        if side == Sign.POSITIVE:
            left.append(w)
            left_end = w
        elif side == Sign.NEGATIVE:
            right.append(w)
            right_end = w
        else:
            raise ConstraintError(f"vertex {w} lies on constraint {(a, b)}")

    for tid in crossed:
        tri.remove(tid)
    _fill_pseudo_polygon(tri, a, b, left[::-1])
    _fill_pseudo_polygon(tri, b, a, right)
    logger.debug("Recovered constraint %s through %d triangles", (a, b), len(crossed))


def _recover_edges(tri: Triangulation, edges: Iterable[Sequence[int]]) -> None:
    """Insert each missing edge and mark every requested edge constrained."""
    for u, v in edges:
        a, b = int(u), int(v)
        if a == b:
            continue
        if not tri.has_edge(a, b):
            _insert_segment(tri, a, b)
        tri.constrained.add(edge_key(a, b))


def _bowyer_watson(points: list[Point2], seed: int) -> Triangulation:
    """Insert the points in seeded random order into a helper triangle enclosing them all."""
    n = len(points)
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    cx = 0.5 * (min(xs) + max(xs))
    cy = 0.5 * (min(ys) + max(ys))
    span = SUPER_TRIANGLE_SCALE * max(max(xs) - min(xs), max(ys) - min(ys))
    helpers = [(cx - 2 * span, cy - span), (cx + 2 * span, cy - span), (cx, cy + 2 * span)]
    tri = Triangulation([*points, *helpers])
    last = tri.add(n, n + 1, n + 2)
    for i in np.random.default_rng(seed).permutation(n).tolist():
        last = _insert_vertex(tri, i, last)
    return tri


def delaunay(points: Sequence[PointLike], seed: int = 0) -> TriMesh:
    """
    Delaunay triangulation of a point set: incremental insertion in a seeded
    shuffled order inside a helper triangle, then recovery of the convex hull
    and removal of everything outside it.
    """
    pts = [Point2(float(p[0]), float(p[1])) for p in points]
    n = len(pts)
    if n < 3:
        raise DelaunayError(f"need at least 3 points, got {n}")
    if len(set(pts)) != n:
        raise DelaunayError("duplicate points")
    if all(orient2d(pts[0], pts[1], p) == Sign.ZERO for p in pts[2:]):
        raise DelaunayError("all points are collinear")

    tri = _bowyer_watson(pts, seed)
    hull = convex_hull(pts)
    _recover_edges(tri, [(hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull))])

    outside = set().union(*(tri.incident[h] for h in (n, n + 1, n + 2)))
    stack = list(outside)
    while stack:
        a, b, c = tri.triangles[stack.pop()]
        for u, v in ((a, b), (b, c), (c, a)):
            nb = tri.owner(v, u)
            if nb is not None and nb not in outside and not tri.is_constrained(u, v):
                outside.add(nb)
                stack.append(nb)
    for tid in sorted(outside):
        tri.remove(tid)
    tri.constrained.clear()
    mesh = tri.to_mesh(vertex_count=n)
    logger.debug("Delaunay triangulation of %d points: %d triangles", n, mesh.n_triangles)
    return mesh


def constrain_edges(mesh: TriMesh, edges: Iterable[Sequence[int]]) -> TriMesh:
    """Force every requested edge into the triangulation and mark it constrained."""
    tri = Triangulation.from_mesh(mesh)
    _recover_edges(tri, edges)
    return tri.to_mesh()


def remove_exterior(mesh: TriMesh, domain: PolygonDomain) -> TriMesh:
    """
    Keep the triangles inside the outer loop and outside every hole. Depth is
    counted by a flood fill from the hull that increments on each constrained
    edge crossed; triangles at odd depth are inside.
    """
    index = {(float(x), float(y)): i for i, (x, y) in enumerate(mesh.vertices.tolist())}
    for p, q in domain.boundary_segments():
        u = index.get((float(p[0]), float(p[1])))
        v = index.get((float(q[0]), float(q[1])))
        if u is None or v is None or edge_key(u, v) not in mesh.constrained:
            raise ConstraintError(f"domain edge {tuple(p)}-{tuple(q)} is not constrained")
    if mesh.neighbor is None:
        mesh = build_adjacency(mesh)
    assert mesh.neighbor is not None

    tris = mesh.triangles.tolist()
    neighbor = mesh.neighbor.tolist()

    def crossing_cost(t: int, k: int) -> int:
        """1 if edge slot k of triangle t is constrained, else 0."""
        return int(edge_key(tris[t][(k + 1) % 3], tris[t][(k + 2) % 3]) in mesh.constrained)

    unreached = mesh.n_triangles + 1
    depth = [unreached] * mesh.n_triangles
    queue: deque[int] = deque()
    for t in range(mesh.n_triangles):
        for k in range(3):
            if neighbor[t][k] == BOUNDARY and crossing_cost(t, k) < depth[t]:
                depth[t] = crossing_cost(t, k)
    for t in sorted(range(mesh.n_triangles), key=lambda t: depth[t]):
        if depth[t] != unreached:
            queue.append(t)
    while queue:
        t = queue.popleft()
        for k in range(3):
            nb = neighbor[t][k]
            if nb == BOUNDARY:
                continue
            cost = crossing_cost(t, k)
            if depth[t] + cost < depth[nb]:
                depth[nb] = depth[t] + cost
                if cost:
                    queue.append(nb)
                else:
                    queue.appendleft(nb)

    for t in range(mesh.n_triangles):
        if depth[t] == unreached:
            raise ConstraintError(f"triangle {t} is not reachable from the hull")
        for k in range(3):
            nb = neighbor[t][k]
            if nb != BOUNDARY and (depth[t] + depth[nb]) % 2 != crossing_cost(t, k):
                raise ConstraintError(
                    f"invalid constraint loop: triangles {t} and {nb} are classified inconsistently"
                )

    keep = [t for t in range(mesh.n_triangles) if depth[t] % 2 == 1]
    kept = mesh.triangles[keep]
    used = np.unique(kept)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    if used.size < mesh.n_vertices:
        logger.debug("Dropping %d vertices outside the domain", mesh.n_vertices - used.size)
    constrained = {
        edge_key(int(remap[u]), int(remap[v]))
        for u, v in mesh.constrained
        if remap[u] >= 0 and remap[v] >= 0
    }
    result = TriMesh(
        vertices=mesh.vertices[used],
        triangles=remap[kept],
        constrained=constrained,
    )
    result = build_adjacency(result)
    present = result.edge_slots()
    result.constrained = {e for e in result.constrained if e in present}
    logger.debug("Removed %d exterior triangles", mesh.n_triangles - len(keep))
    return result


def domain_graph(domain: PolygonDomain) -> tuple[list[Point2], list[Edge]]:
    """Vertex list (outer loop, then holes) and the loop edges as index pairs."""
    points: list[Point2] = []
    edges: list[Edge] = []
    for loop in domain.loops():
        base = len(points)
        points.extend(loop)
        edges.extend((base + j, base + (j + 1) % len(loop)) for j in range(len(loop)))
    return points, edges


def initial_triangulation(domain: PolygonDomain, seed: int = 0) -> TriMesh:
    """Constrained Delaunay triangulation of the domain with exterior and holes removed."""
    check = validate_polygon(domain)
    if not check.ok:
        raise PolygonError(check.defects)
    points, edges = domain_graph(check.domain)
    mesh = delaunay(points, seed=seed)
    mesh = constrain_edges(mesh, edges)
    mesh = remove_exterior(mesh, check.domain)
    logger.info(
        "Initial triangulation: %d vertices, %d triangles", mesh.n_vertices, mesh.n_triangles
    )
    return mesh
