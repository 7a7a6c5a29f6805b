import io

import numpy as np
import pytest

from mesher.driver import GenConfig, adaptmesh
from mesher.errors import DomainParseError, PolygonError
from mesher.formats import parse_domain, read_mesh_json, write_mesh
from mesher.geometry import polygon_area

TWO_TRIANGLE_MSH = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0.0 0.0 0
2 1.0 0.0 0
3 1.0 1.0 0
4 0.0 1.0 0
$EndNodes
$Elements
6
1 1 2 1 1 1 2
2 1 2 1 1 1 4
3 1 2 1 1 2 3
4 1 2 1 1 3 4
5 2 2 2 2 1 2 3
6 2 2 2 2 1 3 4
$EndElements
"""


def read_msh2(text: str) -> tuple[np.ndarray, list[tuple[int, int]], np.ndarray]:
    """Minimal MSH 2.2 ASCII reader: nodes, line elements and triangles (0-based)."""
    lines = iter(text.splitlines())
    nodes, segments, triangles = [], [], []
    for line in lines:
        if line == "$Nodes":
            for _ in range(int(next(lines))):
                _, x, y, _ = next(lines).split()
                nodes.append((float(x), float(y)))
        elif line == "$Elements":
            for _ in range(int(next(lines))):
                fields = [int(v) for v in next(lines).split()]
                body = [v - 1 for v in fields[3 + fields[2] :]]
                if fields[1] == 1:
                    segments.append(tuple(body))
                elif fields[1] == 2:
                    triangles.append(body)
    return np.array(nodes), segments, np.array(triangles)


def loops(domain):
    return [tuple(p) for p in domain.outer], [[tuple(p) for p in h] for h in domain.holes]


def test_parse_json_domain(domain_file):
    domain = domain_file("lshape.json")
    assert len(domain.outer) == 6
    assert domain.holes == []
    assert polygon_area(domain.outer) == pytest.approx(3.0)


def test_parse_domain_from_stream():
    domain = parse_domain(io.StringIO('{"outer": [[0, 0], [0, 1], [1, 1], [1, 0]]}'))
    assert polygon_area(domain.outer) == pytest.approx(1.0)


def test_poly_matches_json_equivalent(domain_file):
    from_poly = domain_file("square_with_hole.poly")
    from_json = parse_domain(
        io.StringIO(
            '{"outer": [[0, 0], [4, 0], [4, 4], [0, 4]],'
            ' "holes": [[[1.5, 1.5], [2.5, 1.5], [2.5, 2.5], [1.5, 2.5]]]}'
        )
    )
    assert loops(from_poly) == loops(from_json)
    assert polygon_area(from_poly.holes[0]) < 0


def test_bowtie_is_rejected():
    with pytest.raises(PolygonError) as info:
        parse_domain(io.StringIO('{"outer": [[0, 0], [1, 1], [1, 0], [0, 1]]}'))
    assert any("self-intersection" in d for d in info.value.defects)


def test_json_syntax_error_has_position():
    with pytest.raises(DomainParseError) as info:
        parse_domain(io.StringIO('{"outer": [[0, 0], [1, 0]\n  [1, 1]]}'))
    assert (info.value.line, info.value.column) == (2, 3)


def test_json_shape_errors():
    with pytest.raises(DomainParseError):
        parse_domain(io.StringIO('{"holes": []}'))
    with pytest.raises(DomainParseError):
        parse_domain(io.StringIO('{"outer": [[0, 0, 0], [1, 0], [1, 1]]}'))
    with pytest.raises(DomainParseError):
        parse_domain(io.StringIO('{"outer": [[0, 0], [1, "a"], [1, 1]]}'))


def test_poly_bad_number_has_position():
    text = "3 2 0 0\n1 0 0\n2 1 x\n3 0 1\n3 0\n1 1 2\n2 2 3\n3 3 1\n"
    with pytest.raises(DomainParseError) as info:
        parse_domain(io.StringIO(text), fmt="poly")
    assert (info.value.line, info.value.column) == (3, 5)


def test_poly_open_chain():
    text = "3 2 0 0\n1 0 0\n2 1 0\n3 0 1\n2 0\n1 1 2\n2 2 3\n"
    with pytest.raises(DomainParseError, match="open constraint chain"):
        parse_domain(io.StringIO(text), fmt="poly")


def test_poly_zero_based_without_hole_section():
    text = "# triangle\n3 2 0 0\n0 0 0\n1 1 0\n2 0 1\n3 0\n0 0 1\n1 1 2\n2 2 0\n"
    domain = parse_domain(io.StringIO(text), fmt="poly")
    assert loops(domain) == ([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], [])


def test_unknown_formats(two_triangle_square):
    with pytest.raises(ValueError):
        parse_domain(io.StringIO("{}"), fmt="off")
    with pytest.raises(ValueError):
        write_mesh(two_triangle_square, "vtk")


def test_msh2_output_for_two_triangles(two_triangle_square):
    assert write_mesh(two_triangle_square, "msh2").decode() == TWO_TRIANGLE_MSH


def test_msh2_output_reads_back(domain_file):
    mesh, _ = adaptmesh(domain_file("lshape.json"), GenConfig(max_refinements=2))
    nodes, segments, triangles = read_msh2(write_mesh(mesh).decode())
    assert np.array_equal(nodes, mesh.vertices)
    assert np.array_equal(triangles, mesh.triangles)
    assert set(segments) == mesh.constrained


def test_json_mesh_reads_back(criss_cross):
    data = write_mesh(criss_cross, "json")
    assert data.endswith(b"\n")
    again = read_mesh_json(data)
    assert np.array_equal(again.vertices, criss_cross.vertices)
    assert np.array_equal(again.triangles, criss_cross.triangles)
    assert again.constrained == criss_cross.constrained
    with pytest.raises(DomainParseError):
        read_mesh_json(b'{"vertices": [[0, 0]]}')


def test_msh2_loads_in_meshio(tmp_path, domain_file):
    meshio = pytest.importorskip("meshio")
    mesh, _ = adaptmesh(domain_file("square.json"), GenConfig(max_refinements=2))
    path = tmp_path / "square.msh"
    path.write_bytes(write_mesh(mesh))
    loaded = meshio.read(path)
    assert np.array_equal(loaded.points[:, :2], mesh.vertices)
    assert np.array_equal(loaded.cells_dict["triangle"], mesh.triangles)
