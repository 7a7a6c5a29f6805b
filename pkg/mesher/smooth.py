import logging
from dataclasses import replace
from typing import TYPE_CHECKING

import numpy as np

from mesher.geometry import (
    Sign,
    in_circumcircle,
    orient2d,
    orient_signs,
    signed_areas,
    triangle_qualities,
)
from mesher.halfedge import Triangulation
from mesher.mesh import TriMesh, build_adjacency

if TYPE_CHECKING:
    from mesher.driver import GenConfig

logger = logging.getLogger(__name__)

SMOOTH_ORDERS = ("flip-first", "move-first")


def _with_adjacency(mesh: TriMesh) -> TriMesh:
    """Return the mesh with its neighbor table and boundary flags filled in."""
    if mesh.neighbor is None or mesh.boundary_vertex is None:
        return build_adjacency(mesh)
    return mesh


def _patch_floor(quality: np.ndarray, flat: np.ndarray, n_vertices: int) -> np.ndarray:
    """Worst triangle quality around each vertex (inf for unused vertices)."""
    floor = np.full(n_vertices, np.inf)
    np.minimum.at(floor, flat, np.repeat(quality, 3))
    return floor


def cpt_positions(mesh: TriMesh) -> np.ndarray:
    """
    Jacobi centroidal-patch update: every interior vertex moves to the
    area-weighted mean of the barycentres of its incident triangles, all
    computed from the current positions. A move is undone when it inverts a
    triangle or lowers the worst quality in the vertex's patch; undoing
    repeats until every remaining move passes, so the mesh minimum quality
    never drops.
    """
    mesh = _with_adjacency(mesh)
    assert mesh.boundary_vertex is not None
    pts = mesh.vertices
    tris = mesh.triangles
    area = signed_areas(pts, tris)
    bary = pts[tris].mean(axis=1)

    flat = tris.ravel()
    old_floor = _patch_floor(triangle_qualities(pts, tris), flat, mesh.n_vertices)
    weighted = np.zeros_like(pts)
    weight = np.zeros(mesh.n_vertices)
    np.add.at(weighted, flat, np.repeat(area[:, None] * bary, 3, axis=0))
    np.add.at(weight, flat, np.repeat(area, 3))

    movable = ~mesh.boundary_vertex & (weight > 0.0)
    new = pts.copy()
    new[movable] = weighted[movable] / weight[movable, None]

    rejected = 0
    while True:
        quality = np.where(
            orient_signs(new, tris) == Sign.POSITIVE, triangle_qualities(new, tris), -1.0
        )
        floor = _patch_floor(quality, flat, mesh.n_vertices)
        moved = np.any(new != pts, axis=1)
        culprits = np.flatnonzero(moved & (floor < old_floor))
        if culprits.size == 0:
            break
        new[culprits] = pts[culprits]
        rejected += int(culprits.size)
    if rejected:
        logger.debug("Rejected %d smoothing moves that would invert or worsen triangles", rejected)
    return new


def cpt_step(mesh: TriMesh) -> tuple[TriMesh, float]:
    """One smoothing sweep; returns the moved mesh and the largest vertex displacement."""
    mesh = _with_adjacency(mesh)
    new = cpt_positions(mesh)
    moved = np.hypot(*(new - mesh.vertices).T)
    return replace(mesh, vertices=new), float(moved.max()) if moved.size else 0.0


def is_locally_delaunay(tri: Triangulation, u: int, v: int) -> bool:
    """True unless the apex across u-v lies strictly inside the circumcircle of (u, v, w)."""
    w = tri.apex(u, v)
    x = tri.apex(v, u)
    if w is None or x is None:
        return True
    p = tri.points
    return in_circumcircle(p[u], p[v], p[w], p[x]) != Sign.POSITIVE


def flip_edges(mesh: TriMesh, sweep_cap: int | None = None) -> tuple[TriMesh, int]:
    """
    Lawson flips over interior unconstrained edges, swept in sorted edge order
    until a sweep makes no flip or sweep_cap sweeps (default 10 * edge count)
    have run. Triangle count, order and constraints are kept.
    """
    tri = Triangulation.from_mesh(mesh)
    cap = 10 * len(mesh.edge_slots()) if sweep_cap is None else sweep_cap
    p = tri.points
    flips = 0
    sweeps = 0
    while sweeps < cap:
        sweeps += 1
        flipped = 0
        for a, b in tri.interior_edges():
            if tri.is_constrained(a, b):
                continue
            if (a, b) not in tri.half_edges or (b, a) not in tri.half_edges:
                continue
            c = tri.apex(a, b)
            d = tri.apex(b, a)
            assert c is not None and d is not None
            if in_circumcircle(p[a], p[b], p[c], p[d]) != Sign.POSITIVE:
                continue
            if (
                orient2d(p[a], p[d], p[c]) != Sign.POSITIVE
                or orient2d(p[d], p[b], p[c]) != Sign.POSITIVE
            ):
                continue
            tri.flip(a, b)
            flipped += 1
        flips += flipped
        if not flipped:
            break
    else:
        logger.warning("Edge flipping stopped at the sweep cap (%d sweeps)", cap)
    logger.debug("Flipped %d edges in %d sweeps", flips, sweeps)
    return tri.to_mesh(), flips


def mean_incident_edge_length(mesh: TriMesh) -> np.ndarray:
    """Average length of the edges meeting at each vertex."""
    ends = np.asarray(mesh.edges(), dtype=np.int64).reshape(-1, 2)
    lengths = np.hypot(*(mesh.vertices[ends[:, 1]] - mesh.vertices[ends[:, 0]]).T)
    total = np.zeros(mesh.n_vertices)
    count = np.zeros(mesh.n_vertices)
    np.add.at(total, ends.ravel(), np.repeat(lengths, 2))
    np.add.at(count, ends.ravel(), 1.0)
    return np.divide(total, count, out=np.ones_like(total), where=count > 0)


def smooth(mesh: TriMesh, cfg: "GenConfig") -> TriMesh:
    """
    Alternate edge flipping and centroidal-patch moves (order from
    cfg.smooth_order) until no vertex moves more than cfg.smooth_tol times its
    mean incident edge length, or cfg.smooth_max_iters rounds; a last flip pass
    leaves the result locally Delaunay.
    """
    current = _with_adjacency(mesh)
    flips = 0
    rounds = 0
    for rounds in range(1, cfg.smooth_max_iters + 1):
        if cfg.smooth_order == "flip-first":
            current, count = flip_edges(current, cfg.flip_sweep_cap)
            flips += count
        before = current.vertices
        scale = mean_incident_edge_length(current)
        current, _ = cpt_step(current)
        if cfg.smooth_order == "move-first":
            current, count = flip_edges(current, cfg.flip_sweep_cap)
            flips += count
        relative = np.hypot(*(current.vertices - before).T) / scale
        if relative.size == 0 or float(relative.max()) < cfg.smooth_tol:
            break
    current, count = flip_edges(current, cfg.flip_sweep_cap)
    flips += count
    logger.debug("Smoothing ran %d rounds with %d flips", rounds, flips)
    return current
