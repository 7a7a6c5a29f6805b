import numpy as np
import pytest

from mesher.cdt import initial_triangulation
from mesher.driver import GenConfig
from mesher.halfedge import Triangulation
from mesher.mesh import TriMesh, quality_stats, total_area, validate_conformity
from mesher.refine import uniform_refine
from mesher.smooth import cpt_positions, cpt_step, flip_edges, is_locally_delaunay, smooth

KITE = [(0.0, 0.0), (1.0, -0.5), (2.0, 0.0), (1.0, 0.5)]


def jittered_grid(grid, n: int, seed: int) -> TriMesh:
    mesh = grid(n)
    rng = np.random.default_rng(seed)
    vertices = mesh.vertices.copy()
    inner = ~mesh.boundary_vertex
    vertices[inner] += rng.uniform(-0.15 / n, 0.15 / n, (int(inner.sum()), 2))
    return TriMesh.from_arrays(vertices, mesh.triangles, mesh.constrained)


def all_locally_delaunay(mesh: TriMesh) -> bool:
    tri = Triangulation.from_mesh(mesh)
    return all(
        tri.is_constrained(u, v) or is_locally_delaunay(tri, u, v)
        for u, v in tri.interior_edges()
    )


def test_centroid_of_criss_cross_is_fixed(criss_cross):
    new = cpt_positions(criss_cross)
    assert new[4] == pytest.approx([0.5, 0.5], abs=1e-15)
    assert np.array_equal(new[:4], criss_cross.vertices[:4])


def test_perturbed_center_returns_to_patch_centroid(criss_cross):
    vertices = criss_cross.vertices.copy()
    vertices[4] = (0.6, 0.5)
    mesh = TriMesh.from_arrays(vertices, criss_cross.triangles, criss_cross.constrained)
    moved, displacement = cpt_step(mesh)
    assert moved.vertices[4] == pytest.approx([0.5, 0.5], abs=1e-12)
    assert displacement == pytest.approx(0.1, abs=1e-12)
    _, displacement = cpt_step(moved)
    assert displacement < 1e-12


def test_boundary_vertices_never_move(grid):
    mesh = jittered_grid(grid, 6, seed=3)
    new = cpt_positions(mesh)
    assert np.array_equal(new[mesh.boundary_vertex], mesh.vertices[mesh.boundary_vertex])
    assert not np.array_equal(new, mesh.vertices)


def test_kite_with_long_diagonal_flips_once():
    mesh = TriMesh.from_arrays(KITE, [(0, 1, 2), (0, 2, 3)])
    flipped, flips = flip_edges(mesh)
    assert flips == 1
    assert flipped.edges() == [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert flipped.n_triangles == 2
    assert all_locally_delaunay(flipped)
    _, again = flip_edges(flipped)
    assert again == 0


def test_constrained_diagonal_is_not_flipped():
    mesh = TriMesh.from_arrays(KITE, [(0, 1, 2), (0, 2, 3)], constrained=[(0, 2)])
    flipped, flips = flip_edges(mesh)
    assert flips == 0
    assert flipped.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_cocircular_grid_needs_no_flips(grid):
    _, flips = flip_edges(grid(4))
    assert flips == 0


def test_flipping_restores_local_delaunay(grid):
    for seed in range(5):
        mesh = jittered_grid(grid, 6, seed)
        flipped, _ = flip_edges(mesh)
        assert flipped.n_triangles == mesh.n_triangles
        assert np.array_equal(flipped.vertices, mesh.vertices)
        assert flipped.constrained == mesh.constrained
        assert validate_conformity(flipped).ok
        assert all_locally_delaunay(flipped)


@pytest.mark.parametrize("order", ["flip-first", "move-first"])
def test_smooth_keeps_boundary_and_counts(grid, order):
    mesh = jittered_grid(grid, 8, seed=21)
    result = smooth(mesh, GenConfig(smooth_order=order))
    assert result.n_triangles == mesh.n_triangles
    assert result.n_vertices == mesh.n_vertices
    fixed = mesh.boundary_vertex
    assert np.array_equal(result.vertices[fixed], mesh.vertices[fixed])
    assert total_area(result) == pytest.approx(total_area(mesh), rel=1e-12)
    assert validate_conformity(result).ok
    assert all_locally_delaunay(result)


def test_smooth_improves_refined_spiral(domain_file):
    domain = domain_file("spiral.json")
    mesh = uniform_refine(initial_triangulation(domain), 1)
    before = quality_stats(mesh)
    result = smooth(mesh, GenConfig())
    after = quality_stats(result)
    assert validate_conformity(result).ok
    assert after.average_quality > before.average_quality
    assert after.min_quality > 0.0


def hexagon_patch(center=(0.0, 0.0)) -> TriMesh:
    ring = [(np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)) for k in range(6)]
    triangles = [(k, (k + 1) % 6, 6) for k in range(6)]
    return TriMesh.from_arrays(ring + [center], triangles, [(k, (k + 1) % 6) for k in range(6)])


def test_equilateral_patch_is_left_alone():
    mesh = hexagon_patch()
    result = smooth(mesh, GenConfig())
    assert result.vertices == pytest.approx(mesh.vertices, abs=1e-15)
    assert result.triangles.tolist() == mesh.triangles.tolist()
    assert quality_stats(result).min_quality == pytest.approx(1.0, abs=1e-12)


def test_single_interior_vertex_matches_iterated_moves(criss_cross):
    vertices = criss_cross.vertices.copy()
    vertices[4] = (0.62, 0.41)
    mesh = TriMesh.from_arrays(vertices, criss_cross.triangles, criss_cross.constrained)
    expected = mesh
    for _ in range(GenConfig().smooth_max_iters):
        expected, displacement = cpt_step(expected)
        if displacement == 0.0:
            break
    result = smooth(mesh, GenConfig())
    assert result.triangles.tolist() == mesh.triangles.tolist()
    assert result.vertices == pytest.approx(expected.vertices, abs=1e-12)
    assert result.vertices[4] == pytest.approx([0.5, 0.5], abs=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_centroid_moves_never_lower_minimum_quality(grid, seed):
    mesh = jittered_grid(grid, 7, seed)
    moved, _ = cpt_step(mesh)
    assert quality_stats(moved).min_quality >= quality_stats(mesh).min_quality
    assert validate_conformity(moved).ok


def test_worsening_move_is_undone():
    # the centroid lies near the long top edge and would flatten the top triangle
    vertices = [(0.0, 0.0), (0.2, 0.0), (3.0, 2.0), (-3.0, 2.0), (0.1, 0.3)]
    triangles = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    mesh = TriMesh.from_arrays(vertices, triangles, [(0, 1), (1, 2), (2, 3), (3, 0)])
    new = cpt_positions(mesh)
    assert np.array_equal(new, mesh.vertices)
    _, displacement = cpt_step(mesh)
    assert displacement == 0.0
