import logging
from collections.abc import Iterable

import numpy as np

from mesher.errors import MeshingError
from mesher.mesh import Edge, TriMesh, build_adjacency, edge_key

logger = logging.getLogger(__name__)


def reference_slots(mesh: TriMesh) -> np.ndarray:
    """
    Slot of the reference edge per triangle (slot k is the edge opposite
    vertex k). The reference edge is the longest one; ties go to the edge
    whose opposite vertex has the lowest index.
    """
    pts = mesh.vertices[mesh.triangles]
    sq = np.empty((mesh.n_triangles, 3))
    for k in range(3):
        d = pts[:, (k + 2) % 3] - pts[:, (k + 1) % 3]
        sq[:, k] = d[:, 0] ** 2 + d[:, 1] ** 2
    longest = sq.max(axis=1, keepdims=True)
    candidates = np.where(sq == longest, mesh.triangles, np.iinfo(np.int64).max)
    return candidates.argmin(axis=1).astype(np.int64)


def _triangle_edges(mesh: TriMesh) -> list[tuple[Edge, Edge, Edge]]:
    """Edge keys per triangle, ordered by the slot opposite each vertex."""
    return [
        (edge_key(b, c), edge_key(c, a), edge_key(a, b)) for a, b, c in mesh.triangles.tolist()
    ]


def closure(mesh: TriMesh, split_edges: Iterable[Edge]) -> set[Edge]:
    """
    Smallest superset of split_edges in which every triangle with a split edge
    also has its reference edge split.
    """
    edges = _triangle_edges(mesh)
    ref = reference_slots(mesh).tolist()
    by_edge: dict[Edge, list[int]] = {}
    for t, tri_edges in enumerate(edges):
        for e in tri_edges:
            by_edge.setdefault(e, []).append(t)

    split: set[Edge] = set()
    for u, v in split_edges:
        key = edge_key(u, v)
        if key not in by_edge:
            raise MeshingError(f"cannot split {key}: not an edge of the mesh")
        split.add(key)

    pending = sorted({t for e in split for t in by_edge[e]})
    rounds = 0
    while pending:
        rounds += 1
        grown: set[int] = set()
        for t in pending:
            reference = edges[t][ref[t]]
            if reference not in split:
                split.add(reference)
                grown.update(by_edge[reference])
        pending = sorted(grown)
    logger.debug("Closure reached %d split edges after %d rounds", len(split), rounds)
    return split


def _children(
    tri: tuple[int, int, int], slot: int, mid: dict[Edge, int]
) -> list[tuple[int, int, int]]:
    """Split one triangle according to which of its edges carry a midpoint."""
    # rotate so the reference edge is (a, b)
    c = tri[slot]
    a = tri[(slot + 1) % 3]
    b = tri[(slot + 2) % 3]
    m_bc = mid.get(edge_key(b, c))
    m_ca = mid.get(edge_key(c, a))
    m = mid.get(edge_key(a, b))
    if m is None:
        if m_bc is not None or m_ca is not None:
            raise MeshingError(f"triangle {tri} has a split edge but an unsplit reference edge")
        return [tri]
    if m_bc is None and m_ca is None:
        return [(a, m, c), (m, b, c)]
    if m_ca is None:
        assert m_bc is not None
        return [(a, m, c), (m, b, m_bc), (m, m_bc, c)]
    if m_bc is None:
        return [(m, b, c), (a, m, m_ca), (m, c, m_ca)]
    return [(a, m, m_ca), (m, b, m_bc), (m_ca, m_bc, c), (m, m_bc, m_ca)]


def rgb_refine(mesh: TriMesh, marked: Iterable[int]) -> TriMesh:
    """
    Red-split every marked triangle and close the refinement with green and
    blue splits so the result stays conformal. Children of a triangle are
    emitted together in the parent's position; new midpoints are appended in
    sorted edge order.
    """
    marked = sorted(set(int(t) for t in marked))
    if mesh.neighbor is None or mesh.boundary_vertex is None:
        mesh = build_adjacency(mesh)
    if not marked:
        return mesh
    if marked[0] < 0 or marked[-1] >= mesh.n_triangles:
        raise MeshingError("marked triangle index out of range")

    edges = _triangle_edges(mesh)
    split = closure(mesh, (e for t in marked for e in edges[t]))

    vertices = mesh.vertices
    ordered = sorted(split)
    ends = np.asarray(ordered, dtype=np.int64).reshape(-1, 2)
    midpoints = 0.5 * (vertices[ends[:, 0]] + vertices[ends[:, 1]])
    mid = {e: mesh.n_vertices + i for i, e in enumerate(ordered)}

    constrained: set[Edge] = set()
    for u, v in mesh.constrained:
        m = mid.get((u, v))
        if m is None:
            constrained.add((u, v))
        else:
            constrained.update((edge_key(u, m), edge_key(m, v)))

    slots = reference_slots(mesh).tolist()
    triangles: list[tuple[int, int, int]] = []
    for t, tri in enumerate(mesh.triangles.tolist()):
        triangles.extend(_children((tri[0], tri[1], tri[2]), slots[t], mid))

    logger.debug(
        "Refined %d marked triangles: %d split edges, %d -> %d triangles",
        len(marked),
        len(split),
        mesh.n_triangles,
        len(triangles),
    )
    return TriMesh.from_arrays(np.vstack((vertices, midpoints)), triangles, constrained)


def uniform_refine(mesh: TriMesh, times: int = 1) -> TriMesh:
    """Red-refine every triangle `times` times."""
    for _ in range(times):
        mesh = rgb_refine(mesh, range(mesh.n_triangles))
    return mesh
