import sys
from collections.abc import Callable
from pathlib import Path

import pytest

# Ensure the repository root is on the Python path for test imports.
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mesher.formats import parse_domain  # noqa: E402
from mesher.mesh import PolygonDomain, TriMesh, edge_key  # noqa: E402

DOMAINS = ROOT / "domains"


def boundary_constraints(triangles: list[tuple[int, int, int]]) -> set[tuple[int, int]]:
    count: dict[tuple[int, int], int] = {}
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            key = edge_key(u, v)
            count[key] = count.get(key, 0) + 1
    return {e for e, n in count.items() if n == 1}


def grid_square(n: int, size: float = 1.0) -> TriMesh:
    """n x n structured mesh of [0, size]^2, each cell cut along its rising diagonal."""
    vertices = [(size * i / n, size * j / n) for j in range(n + 1) for i in range(n + 1)]
    triangles = []
    for j in range(n):
        for i in range(n):
            p = j * (n + 1) + i
            q, r, s = p + 1, p + n + 2, p + n + 1
            triangles += [(p, q, r), (p, r, s)]
    return TriMesh.from_arrays(vertices, triangles, boundary_constraints(triangles))


@pytest.fixture
def unit_square() -> PolygonDomain:
    return PolygonDomain(outer=[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


@pytest.fixture
def criss_cross() -> TriMesh:
    """Unit square split into four triangles around its center."""
    vertices = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]
    triangles = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return TriMesh.from_arrays(vertices, triangles, boundary_constraints(triangles))


@pytest.fixture
def two_triangle_square() -> TriMesh:
    vertices = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    triangles = [(0, 1, 2), (0, 2, 3)]
    return TriMesh.from_arrays(vertices, triangles, boundary_constraints(triangles))


@pytest.fixture
def grid() -> Callable[..., TriMesh]:
    return grid_square


@pytest.fixture
def domain_file() -> Callable[[str], PolygonDomain]:
    def load(name: str) -> PolygonDomain:
        return parse_domain(DOMAINS / name)

    return load
