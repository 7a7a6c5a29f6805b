import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from mesher.errors import EmptySystemError, MeshingError, NonConvergenceError
from mesher.geometry import edge_lengths, signed_areas
from mesher.mesh import BOUNDARY, TriMesh, build_adjacency

logger = logging.getLogger(__name__)

ESTIMATOR_VARIANTS = ("area-squared", "classical")


@dataclass
class SparseSystem:
    """P1 stiffness matrix and load vector over the interior vertices."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    interior: np.ndarray  # vertex index of every unknown
    n_vertices: int


@dataclass
class FemSolution:
    """Nodal values on every vertex (zero on the boundary) plus solver diagnostics."""

    nodal_values: np.ndarray
    solver_iterations: int
    residual_norm: float


@dataclass
class ErrorField:
    """Per-triangle error indicator and its maximum."""

    eta: np.ndarray
    eta_max: float


def basis_gradients(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Constant gradients of the three hat functions per triangle, shape (m, 3, 2), and areas."""
    pts = mesh.vertices[mesh.triangles]
    area = signed_areas(mesh.vertices, mesh.triangles)
    grads = np.empty((mesh.n_triangles, 3, 2))
    for k in range(3):
        p = pts[:, (k + 1) % 3]
        q = pts[:, (k + 2) % 3]
        grads[:, k, 0] = (p[:, 1] - q[:, 1]) / (2.0 * area)
        grads[:, k, 1] = (q[:, 0] - p[:, 0]) / (2.0 * area)
    return grads, area


def _ensure_adjacency(mesh: TriMesh) -> TriMesh:
    """Return the mesh with its neighbor table and boundary flags filled in."""
    if mesh.neighbor is None or mesh.boundary_vertex is None:
        return build_adjacency(mesh)
    return mesh


def assemble(mesh: TriMesh, source: float = 1.0) -> SparseSystem:
    """
    Assemble the Dirichlet Poisson problem -lap u = source with P1 elements.
    Boundary rows and columns are eliminated; duplicates are summed in
    triangle order so the matrix is exactly symmetric.
    """
    mesh = _ensure_adjacency(mesh)
    assert mesh.boundary_vertex is not None
    interior = np.flatnonzero(~mesh.boundary_vertex)
    if interior.size == 0:
        raise EmptySystemError("mesh has no interior vertices")
    n = interior.size
    dof = np.full(mesh.n_vertices, -1, dtype=np.int64)
    dof[interior] = np.arange(n)

    grads, area = basis_gradients(mesh)
    gx = grads[:, :, 0]
    gy = grads[:, :, 1]
    dots = gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]
    local = area[:, None, None] * dots

    tri_dof = dof[mesh.triangles]
    rows = np.broadcast_to(tri_dof[:, :, None], local.shape)
    cols = np.broadcast_to(tri_dof[:, None, :], local.shape)
    keep = (rows >= 0) & (cols >= 0)
    keys = rows[keep] * n + cols[keep]
    unique, inverse = np.unique(keys, return_inverse=True)
    data = np.bincount(inverse, weights=local[keep], minlength=unique.size)
    matrix = sp.csr_matrix((data, (unique // n, unique % n)), shape=(n, n))

    load = np.broadcast_to((source * area / 3.0)[:, None], tri_dof.shape)
    loaded = tri_dof >= 0
    rhs = np.bincount(tri_dof[loaded], weights=load[loaded], minlength=n)
    logger.debug("Assembled %d unknowns, %d nonzeros", n, matrix.nnz)
    return SparseSystem(matrix=matrix, rhs=rhs, interior=interior, n_vertices=mesh.n_vertices)


def solve(system: SparseSystem, tol: float = 1e-10, max_iter: int | None = None) -> FemSolution:
    """
    Jacobi-preconditioned conjugate gradients. Convergence is confirmed on the
    true residual; if it disagrees with the recurrence, iteration restarts from it.
    """
    matrix, b = system.matrix, system.rhs
    n = b.size
    limit = 20 * n if max_iter is None else max_iter
    values = np.zeros(system.n_vertices)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return FemSolution(nodal_values=values, solver_iterations=0, residual_norm=0.0)

    diag = matrix.diagonal()
    if np.any(diag <= 0.0):
        raise MeshingError("stiffness matrix has a non-positive diagonal entry")
    inv_diag = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    relative = 1.0
    while True:
        relative = float(np.linalg.norm(r)) / b_norm
        if relative <= tol:
            r = b - matrix @ x
            relative = float(np.linalg.norm(r)) / b_norm
            if relative <= tol:
                break
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
        if iterations >= limit:
            raise NonConvergenceError(iterations, relative)
        ap = matrix @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = inv_diag * r
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
        iterations += 1

    values[system.interior] = x
    logger.debug("CG converged in %d iterations (residual %.2e)", iterations, relative)
    return FemSolution(nodal_values=values, solver_iterations=iterations, residual_norm=relative)


def estimate(
    mesh: TriMesh, sol: FemSolution, source: float = 1.0, variant: str = "area-squared"
) -> ErrorField:
    """
    Residual indicator per triangle:
    eta_T^2 = element term + 1/2 h_T sum_e |e| [grad u . n]^2 over interior edges.
    The element term is h_T^2 (f A_T)^2 ("area-squared") or h_T^2 f^2 A_T ("classical").
    """
    if variant not in ESTIMATOR_VARIANTS:
        raise ValueError(f"unknown estimator variant {variant!r}")
    mesh = _ensure_adjacency(mesh)
    assert mesh.neighbor is not None
    grads, area = basis_gradients(mesh)
    gradient = np.einsum("ti,tik->tk", sol.nodal_values[mesh.triangles], grads)
    longest = edge_lengths(mesh.vertices, mesh.triangles).max(axis=1)
    if variant == "area-squared":
        element = longest**2 * (source * area) ** 2
    else:
        element = longest**2 * source**2 * area

    jumps = np.zeros(mesh.n_triangles)
    for k in range(3):
        nb = mesh.neighbor[:, k]
        inner = nb != BOUNDARY
        p = mesh.vertices[mesh.triangles[:, (k + 1) % 3]]
        q = mesh.vertices[mesh.triangles[:, (k + 2) % 3]]
        edge = q - p
        length = np.hypot(edge[:, 0], edge[:, 1])
        normal = np.column_stack((edge[:, 1], -edge[:, 0])) / length[:, None]
        jump = ((gradient - gradient[np.where(inner, nb, 0)]) * normal).sum(axis=1)
        jumps += np.where(inner, length * jump**2, 0.0)

    eta = np.sqrt(element + 0.5 * longest * jumps)
    return ErrorField(eta=eta, eta_max=float(eta.max()) if eta.size else 0.0)


def mark(errors: ErrorField, theta: float) -> set[int]:
    """Triangles whose indicator strictly exceeds theta times the maximum."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if errors.eta.size == 0:
        raise ValueError("cannot mark an empty error field")
    return set(np.flatnonzero(errors.eta > theta * errors.eta_max).tolist())
