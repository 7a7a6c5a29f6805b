import logging
from collections.abc import Sequence

import numpy as np

from mesher.errors import MeshingError
from mesher.geometry import PointLike
from mesher.mesh import Edge, TriMesh, build_adjacency, edge_key

Triangle = tuple[int, int, int]


class Triangulation:
    """
    Mutable triangle store indexed by directed edges. Each counterclockwise
    triangle (a, b, c) owns the directed edges a->b, b->c and c->a, so the
    triangle across an edge u->v is the owner of v->u. Stages that rewrite
    topology (Delaunay insertion, constraint recovery, flipping) work on this
    and convert back to a TriMesh when done.
    """

    def __init__(self, points: Sequence[PointLike]) -> None:
        """Start an empty triangulation over a copy of the given points."""
        self.points: list[tuple[float, float]] = [(float(p[0]), float(p[1])) for p in points]
        self.triangles: dict[int, Triangle] = {}
        self.half_edges: dict[tuple[int, int], int] = {}
        self.incident: list[set[int]] = [set() for _ in self.points]
        self.constrained: set[Edge] = set()
        self._next_id = 0
        self.logger = logging.getLogger(__name__)

    @classmethod
    def from_mesh(cls, mesh: TriMesh) -> "Triangulation":
        """Load vertices, triangles (ids follow triangle order) and constraints."""
        tri = cls(mesh.vertices.tolist())
        for a, b, c in mesh.triangles.tolist():
            tri.add(a, b, c)
        tri.constrained = set(mesh.constrained)
        return tri

    def add_point(self, p: PointLike) -> int:
        """Append a vertex and return its index."""
        self.points.append((float(p[0]), float(p[1])))
        self.incident.append(set())
        return len(self.points) - 1

    def _attach(self, tid: int, tri: Triangle) -> None:
        """Register triangle tid and its three directed edges."""
        a, b, c = tri
        for edge in ((a, b), (b, c), (c, a)):
            if edge in self.half_edges:
                raise MeshingError(f"directed edge {edge} already belongs to a triangle")
        self.triangles[tid] = tri
        for edge in ((a, b), (b, c), (c, a)):
            self.half_edges[edge] = tid
        for v in tri:
            self.incident[v].add(tid)

    def _detach(self, tid: int) -> Triangle:
        """Forget triangle tid and its directed edges."""
        a, b, c = self.triangles[tid]
        for edge in ((a, b), (b, c), (c, a)):
            del self.half_edges[edge]
        for v in (a, b, c):
            self.incident[v].discard(tid)
        return a, b, c

    def add(self, a: int, b: int, c: int) -> int:
        """Insert the counterclockwise triangle (a, b, c); returns its id."""
        tid = self._next_id
        self._next_id += 1
        self._attach(tid, (a, b, c))
        return tid

    def remove(self, tid: int) -> Triangle:
        """Delete a triangle and return its vertices."""
        tri = self._detach(tid)
        del self.triangles[tid]
        return tri

    def owner(self, u: int, v: int) -> int | None:
        """Id of the triangle that owns the directed edge u->v."""
        return self.half_edges.get((u, v))

    def apex(self, u: int, v: int) -> int | None:
        """Third vertex of the triangle owning u->v, or None on the boundary."""
        tid = self.half_edges.get((u, v))
        if tid is None:
            return None
        for w in self.triangles[tid]:
            if w != u and w != v:
                return w
        return None

    def has_edge(self, u: int, v: int) -> bool:
        """True if u-v is an edge in either direction."""
        return (u, v) in self.half_edges or (v, u) in self.half_edges

    def is_constrained(self, u: int, v: int) -> bool:
        """True if u-v is a constrained edge."""
        return edge_key(u, v) in self.constrained

    def flip(self, u: int, v: int) -> None:
        """
        Replace the diagonal of the quad around edge u-v: (u, v, w), (v, u, x)
        become (u, x, w), (x, v, w). Triangle ids are kept.
        """
        t1 = self.half_edges[(u, v)]
        t2 = self.half_edges[(v, u)]
        w = self.apex(u, v)
        x = self.apex(v, u)
        assert w is not None and x is not None
        self._detach(t1)
        self._detach(t2)
        self._attach(t1, (u, x, w))
        self._attach(t2, (x, v, w))

    def interior_edges(self) -> list[Edge]:
        """Sorted undirected edges with a triangle on both sides."""
        return sorted({edge_key(u, v) for (u, v) in self.half_edges if (v, u) in self.half_edges})

    def to_mesh(self, vertex_count: int | None = None) -> TriMesh:
        """
        Snapshot as a TriMesh with triangles in id order. vertex_count drops
        trailing helper vertices, which must no longer be referenced.
        """
        count = len(self.points) if vertex_count is None else vertex_count
        triangles = [self.triangles[tid] for tid in sorted(self.triangles)]
        if any(v >= count for tri in triangles for v in tri):
            raise MeshingError("triangulation still references dropped helper vertices")
        self.logger.debug("Snapshot: %d vertices, %d triangles", count, len(triangles))
        mesh = TriMesh(
            vertices=np.asarray(self.points[:count], dtype=float).reshape(-1, 2),
            triangles=np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
            constrained={e for e in self.constrained if e[1] < count},
        )
        return build_adjacency(mesh)
