import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mesher.driver import GenConfig, adaptmesh
from mesher.errors import EmptySystemError, NonConvergenceError
from mesher.fem import ErrorField, FemSolution, assemble, estimate, mark, solve
from mesher.geometry import edge_lengths, signed_areas
from mesher.mesh import PolygonDomain
from mesher.refine import uniform_refine

SQUARE_CENTER_VALUE = 0.0736713532


def test_assemble_criss_cross(criss_cross):
    system = assemble(criss_cross)
    assert system.interior.tolist() == [4]
    assert system.matrix.toarray().tolist() == [[4.0]]
    assert system.rhs[0] == pytest.approx(1 / 3, abs=1e-15)


def test_solve_criss_cross(criss_cross):
    sol = solve(assemble(criss_cross))
    assert sol.nodal_values[4] == pytest.approx(1 / 12, abs=1e-12)
    assert sol.nodal_values[:4].tolist() == [0.0, 0.0, 0.0, 0.0]


def test_zero_source_gives_zero_solution(grid):
    system = assemble(grid(4), source=0.0)
    assert not system.rhs.any()
    sol = solve(system)
    assert sol.solver_iterations == 0
    assert not sol.nodal_values.any()


def test_no_interior_vertex(two_triangle_square):
    with pytest.raises(EmptySystemError):
        assemble(two_triangle_square)


def test_stiffness_matrix_is_exactly_symmetric_and_positive_definite(grid):
    mesh = uniform_refine(grid(3), 1)
    matrix = assemble(mesh).matrix
    assert (matrix != matrix.T).nnz == 0
    assert (matrix.diagonal() > 0).all()
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.standard_normal(matrix.shape[0])
        assert x @ (matrix @ x) > 0


def test_solution_residual_within_tolerance(grid):
    system = assemble(grid(12))
    sol = solve(system, tol=1e-10)
    x = sol.nodal_values[system.interior]
    residual = np.linalg.norm(system.rhs - system.matrix @ x) / np.linalg.norm(system.rhs)
    assert residual <= 1e-10
    assert sol.residual_norm <= 1e-10


def test_iteration_cap_raises(grid):
    with pytest.raises(NonConvergenceError) as info:
        solve(assemble(grid(8)), max_iter=1)
    assert info.value.iterations == 1
    assert info.value.residual > 1e-10


@pytest.mark.slow
def test_unit_square_center_value_converges(grid):
    errors = []
    for n in (8, 16, 32, 64):
        sol = solve(assemble(grid(n)))
        errors.append(abs(sol.nodal_values.max() - SQUARE_CENTER_VALUE))
    assert errors == sorted(errors, reverse=True)
    assert errors[-1] < 1e-3


@pytest.mark.slow
def test_disk_maximum_matches_radial_solution():
    angles = np.linspace(0.0, 2 * np.pi, 128, endpoint=False)
    disk = PolygonDomain(outer=list(zip(np.cos(angles).tolist(), np.sin(angles).tolist())))
    mesh, _ = adaptmesh(disk, GenConfig())
    sol = solve(assemble(uniform_refine(mesh, 2)))
    assert abs(sol.nodal_values.max() - 0.25) < 2e-3


def test_linear_field_has_no_jumps(grid):
    mesh = grid(4)
    values = mesh.vertices[:, 0] + 2.0 * mesh.vertices[:, 1]
    sol = FemSolution(nodal_values=values, solver_iterations=0, residual_norm=0.0)
    errors = estimate(mesh, sol, source=0.0)
    assert errors.eta == pytest.approx(np.zeros(mesh.n_triangles), abs=1e-12)


def test_criss_cross_indicators_are_equal(criss_cross):
    errors = estimate(criss_cross, solve(assemble(criss_cross)))
    assert errors.eta == pytest.approx(np.full(4, errors.eta[0]), rel=1e-12)
    assert errors.eta_max == errors.eta.max()


def test_indicator_symmetry_on_refined_criss_cross(criss_cross):
    mesh = uniform_refine(criss_cross, 2)
    errors = estimate(mesh, solve(assemble(mesh), tol=1e-12))
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    lookup = {tuple(np.round(c, 9)): e for c, e in zip(centroids.tolist(), errors.eta.tolist())}
    for (x, y), eta in zip(centroids.tolist(), errors.eta.tolist()):
        for image in ((1 - x, y), (x, 1 - y), (y, x)):
            assert lookup[tuple(np.round(image, 9))] == pytest.approx(eta, rel=1e-8)


def test_element_term_lower_bound(grid):
    mesh = uniform_refine(grid(2), 1)
    errors = estimate(mesh, solve(assemble(mesh, source=2.0)), source=2.0)
    h = edge_lengths(mesh.vertices, mesh.triangles).max(axis=1)
    area = signed_areas(mesh.vertices, mesh.triangles)
    assert (errors.eta >= h * area * 2.0 * (1 - 1e-12)).all()


def test_classical_variant_uses_area_not_area_squared(criss_cross):
    sol = FemSolution(nodal_values=np.zeros(5), solver_iterations=0, residual_norm=0.0)
    squared = estimate(criss_cross, sol, variant="area-squared")
    classical = estimate(criss_cross, sol, variant="classical")
    # longest edge of each quarter is a unit side
    assert squared.eta == pytest.approx(np.full(4, 0.25))
    assert classical.eta == pytest.approx(np.full(4, 0.5))
    with pytest.raises(ValueError):
        estimate(criss_cross, sol, variant="other")


def test_mark_examples():
    assert mark(ErrorField(np.array([1.0, 0.4, 0.6]), 1.0), 0.5) == {0, 2}
    assert mark(ErrorField(np.full(5, 0.3), 0.3), 0.5) == {0, 1, 2, 3, 4}
    assert mark(ErrorField(np.zeros(3), 0.0), 0.5) == set()
    with pytest.raises(ValueError):
        mark(ErrorField(np.ones(2), 1.0), 1.0)
    with pytest.raises(ValueError):
        mark(ErrorField(np.ones(2), 1.0), 0.0)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.floats(min_value=0.0, max_value=1e6, allow_subnormal=False), min_size=1, max_size=50
    ),
    st.floats(min_value=0.01, max_value=0.99),
)
def test_mark_is_the_strict_threshold_set(values, theta):
    eta = np.asarray(values)
    marked = mark(ErrorField(eta, float(eta.max())), theta)
    assert marked == {i for i, v in enumerate(values) if v > theta * max(values)}
    if max(values) > 0:
        assert int(np.argmax(eta)) in marked
