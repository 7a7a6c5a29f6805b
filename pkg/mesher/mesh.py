import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from mesher.errors import MeshingError, NonManifoldError
from mesher.geometry import (
    Point2,
    PointLike,
    Sign,
    inside_segment,
    orient2d,
    signed_areas,
    triangle_min_angles,
    triangle_qualities,
)

logger = logging.getLogger(__name__)

BOUNDARY = -1
OUTSIDE = None

Edge = tuple[int, int]


def edge_key(u: int, v: int) -> Edge:
    """Undirected edge key: the smaller vertex index first."""
    return (u, v) if u < v else (v, u)


@dataclass
class PolygonDomain:
    """Outer corner-point loop plus hole loops."""

    outer: list[Point2]
    holes: list[list[Point2]] = field(default_factory=list)

    def loops(self) -> list[list[Point2]]:
        """Outer loop first, then the holes."""
        return [self.outer, *self.holes]

    def boundary_segments(self) -> list[tuple[Point2, Point2]]:
        """Every closed-loop edge (C_j, C_j+1) of every loop."""
        segments = []
        for loop in self.loops():
            for i, p in enumerate(loop):
                segments.append((p, loop[(i + 1) % len(loop)]))
        return segments


@dataclass
class TriMesh:
    """
    Triangle mesh with counterclockwise triangles. Neighbor slot k of a
    triangle is the triangle across the edge opposite its vertex k, or BOUNDARY.
    `neighbor` and `boundary_vertex` are None until build_adjacency runs.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    constrained: set[Edge] = field(default_factory=set)
    neighbor: np.ndarray | None = None
    boundary_vertex: np.ndarray | None = None

    @classmethod
    def from_arrays(
        cls,
        vertices: Sequence[PointLike] | np.ndarray,
        triangles: Sequence[Sequence[int]] | np.ndarray,
        constrained: Iterable[Sequence[int]] = (),
    ) -> "TriMesh":
        """Build an adjacency-populated mesh from plain coordinate/index lists."""
        mesh = cls(
            vertices=np.asarray(vertices, dtype=float).reshape(-1, 2),
            triangles=np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
            constrained={edge_key(int(u), int(v)) for u, v in constrained},
        )
        return build_adjacency(mesh)

    @property
    def n_vertices(self) -> int:
        """Number of vertices."""
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        """Number of triangles."""
        return int(self.triangles.shape[0])

    def edge_slots(self) -> dict[Edge, list[tuple[int, int]]]:
        """Map every undirected edge to its (triangle, slot) occurrences, in triangle order."""
        slots: dict[Edge, list[tuple[int, int]]] = {}
        for t, (a, b, c) in enumerate(self.triangles.tolist()):
            slots.setdefault(edge_key(b, c), []).append((t, 0))
            slots.setdefault(edge_key(c, a), []).append((t, 1))
            slots.setdefault(edge_key(a, b), []).append((t, 2))
        return slots

    def edges(self) -> list[Edge]:
        """All undirected edges, sorted."""
        return sorted(self.edge_slots())

    def boundary_edges(self) -> list[Edge]:
        """Sorted undirected edges that belong to a single triangle."""
        return sorted(e for e, occ in self.edge_slots().items() if len(occ) == 1)

    def copy(self) -> "TriMesh":
        """Deep copy, adjacency included."""
        return TriMesh(
            vertices=self.vertices.copy(),
            triangles=self.triangles.copy(),
            constrained=set(self.constrained),
            neighbor=None if self.neighbor is None else self.neighbor.copy(),
            boundary_vertex=None if self.boundary_vertex is None else self.boundary_vertex.copy(),
        )


@dataclass
class ConformityReport:
    """Outcome of validate_conformity; violations are human-readable strings."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """True when no violation was found."""
        return not self.violations


@dataclass
class QualityStats:
    """Aggregates of the per-triangle shape measures; angles in radians."""

    average_quality: float
    min_quality: float
    average_min_angle: float
    histogram: list[int]

    @property
    def average_min_angle_deg(self) -> float:
        """average_min_angle in degrees."""
        return math.degrees(self.average_min_angle)


def build_adjacency(mesh: TriMesh) -> TriMesh:
    """Populate the neighbor table and boundary-vertex flags."""
    n_tri = mesh.n_triangles
    if n_tri and (mesh.triangles.min() < 0 or mesh.triangles.max() >= mesh.n_vertices):
        raise MeshingError("triangle references a vertex index out of range")
    neighbor = np.full((n_tri, 3), BOUNDARY, dtype=np.int64)
    boundary_vertex = np.zeros(mesh.n_vertices, dtype=bool)
    for edge, occurrences in mesh.edge_slots().items():
        if len(occurrences) >= 3:
            raise NonManifoldError(edge, len(occurrences))
        if len(occurrences) == 2:
            (t1, s1), (t2, s2) = occurrences
            neighbor[t1, s1] = t2
            neighbor[t2, s2] = t1
        else:
            boundary_vertex[list(edge)] = True
    return replace(mesh, neighbor=neighbor, boundary_vertex=boundary_vertex)


def _hanging_nodes(mesh: TriMesh, edges: list[Edge]) -> list[str]:
    """Vertices lying strictly inside some edge, found through a KD-tree over edge midpoints."""
    if not edges or mesh.n_vertices == 0:
        return []
    pts = mesh.vertices
    ends = np.asarray(edges, dtype=np.int64)
    mid = 0.5 * (pts[ends[:, 0]] + pts[ends[:, 1]])
    radius = 0.5 * np.hypot(*(pts[ends[:, 1]] - pts[ends[:, 0]]).T) * (1.0 + 1e-9)
    tree = cKDTree(pts)
    found = []
    for (u, v), candidates in zip(edges, tree.query_ball_point(mid, radius)):
        a, b = pts[u], pts[v]
        for w in sorted(candidates):
            if w in (u, v):
                continue
            p = pts[w]
            if inside_segment(a, b, p):
                found.append(f"hanging node: vertex {w} lies inside edge {(u, v)}")
    return found


def validate_conformity(mesh: TriMesh) -> ConformityReport:
    """Check orientation, edge multiplicity, constraints, adjacency and hanging nodes."""
    report = ConformityReport()
    if mesh.n_triangles == 0:
        report.violations.append("mesh has no triangles")
        return report

    pts = mesh.vertices
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        sign = orient2d(pts[a], pts[b], pts[c])
        if sign == Sign.NEGATIVE:
            report.violations.append(f"negative orientation: triangle {t}")
        elif sign == Sign.ZERO:
            report.violations.append(f"degenerate triangle: triangle {t}")

    slots = mesh.edge_slots()
    single = []
    for edge, occurrences in slots.items():
        if len(occurrences) > 2:
            report.violations.append(f"non-manifold edge {edge} in {len(occurrences)} triangles")
        elif len(occurrences) == 1:
            single.append(edge)
    for edge in sorted(mesh.constrained):
        if edge not in slots:
            report.violations.append(f"constrained edge {edge} is not a triangle edge")

    if mesh.neighbor is not None and mesh.boundary_vertex is not None:
        for t in range(mesh.n_triangles):
            for k in range(3):
                other = int(mesh.neighbor[t, k])
                if other != BOUNDARY and t not in mesh.neighbor[other].tolist():
                    report.violations.append(f"asymmetric adjacency between {t} and {other}")
        expected = np.zeros(mesh.n_vertices, dtype=bool)
        for u, v in single:
            expected[[u, v]] = True
        wrong = np.flatnonzero(expected != mesh.boundary_vertex)
        if wrong.size:
            report.violations.append(f"boundary flags wrong for vertices {wrong.tolist()}")
    else:
        report.violations.append("adjacency not built")

    report.violations.extend(_hanging_nodes(mesh, sorted(slots)))
    if report.violations:
        logger.debug("Conformity check found %d violations", len(report.violations))
    return report


def total_area(mesh: TriMesh) -> float:
    """Sum of the triangle areas."""
    return math.fsum(signed_areas(mesh.vertices, mesh.triangles).tolist())


def quality_stats(mesh: TriMesh) -> QualityStats:
    """Average/min quality, average minimum angle and a 10-bin quality histogram."""
    if mesh.n_triangles == 0:
        raise MeshingError("quality statistics of an empty mesh")
    quality = triangle_qualities(mesh.vertices, mesh.triangles)
    min_angles = triangle_min_angles(mesh.vertices, mesh.triangles)
    histogram, _ = np.histogram(quality, bins=10, range=(0.0, 1.0))
    return QualityStats(
        average_quality=math.fsum(quality.tolist()) / quality.size,
        min_quality=float(quality.min()),
        average_min_angle=math.fsum(min_angles.tolist()) / min_angles.size,
        histogram=[int(h) for h in histogram],
    )


def locate_point(mesh: TriMesh, p: PointLike) -> int | None:
    """Lowest-index triangle containing p (edges and vertices included), or OUTSIDE."""
    pts = mesh.vertices
    tri_pts = pts[mesh.triangles]
    lo = tri_pts.min(axis=1)
    hi = tri_pts.max(axis=1)
    in_box = (lo[:, 0] <= p[0]) & (p[0] <= hi[:, 0]) & (lo[:, 1] <= p[1]) & (p[1] <= hi[:, 1])
    for t in np.flatnonzero(in_box).tolist():
        a, b, c = mesh.triangles[t].tolist()
        if (
            orient2d(pts[a], pts[b], p) != Sign.NEGATIVE
            and orient2d(pts[b], pts[c], p) != Sign.NEGATIVE
            and orient2d(pts[c], pts[a], p) != Sign.NEGATIVE
        ):
            return t
    return OUTSIDE


def constrained_chain_defects(mesh: TriMesh, domain: PolygonDomain) -> list[str]:
    """
    Check that each input edge is reproduced by a chain of constrained
    subsegments running from one corner to the other, and that every
    constrained edge belongs to such a chain.
    """
    pts = mesh.vertices
    index = {(float(x), float(y)): i for i, (x, y) in enumerate(pts.tolist())}
    adjacent: dict[int, list[int]] = {}
    for u, v in sorted(mesh.constrained):
        adjacent.setdefault(u, []).append(v)
        adjacent.setdefault(v, []).append(u)

    defects = []
    used: set[Edge] = set()
    for p, q in domain.boundary_segments():
        start = index.get((float(p[0]), float(p[1])))
        end = index.get((float(q[0]), float(q[1])))
        if start is None or end is None:
            defects.append(f"corner of edge {p}-{q} is not a mesh vertex")
            continue
        direction = np.array([q[0] - p[0], q[1] - p[1]])
        length = float(np.hypot(*direction))
        tol = 1e-9 * length
        current, progress = start, 0.0
        while current != end:
            best = None
            for w in adjacent.get(current, []):
                rel = pts[w] - np.asarray(p)
                t = float(rel @ direction) / length
                off = abs(float(rel[0] * direction[1] - rel[1] * direction[0])) / length
                if off <= tol and t > progress + tol and (best is None or t < best[1]):
                    best = (w, t)
            if best is None:
                defects.append(f"input edge {p}-{q} is not covered by constrained subsegments")
                break
            used.add(edge_key(current, best[0]))
            current, progress = best
    for edge in sorted(mesh.constrained - used):
        defects.append(f"constrained edge {edge} lies on no input edge")
    return defects
