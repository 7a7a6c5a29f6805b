import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mesher.mesh import TriMesh
from mesher.refine import uniform_refine
from mesher.svg import HIGH_RGB, LOW_RGB, PLAIN_FILL, SVG_NS, render_svg

POLYGON = f"{{{SVG_NS}}}polygon"


def polygons(data: bytes) -> list[ET.Element]:
    return ET.fromstring(data).findall(f".//{POLYGON}")


def test_single_triangle():
    mesh = TriMesh.from_arrays([(0, 0), (2, 0), (0, 1)], [(0, 1, 2)])
    data = render_svg(mesh)
    assert data.startswith(b"<?xml")
    root = ET.fromstring(data)
    assert root.tag == f"{{{SVG_NS}}}svg"
    (polygon,) = polygons(data)
    assert polygon.get("fill") == PLAIN_FILL
    # y is mirrored so the drawing is not upside down
    assert polygon.get("points") == "0.0,-0.0 2.0,-0.0 0.0,-1.0"
    x, y, w, h = (float(v) for v in root.get("viewBox").split())
    assert (x, y, w, h) == pytest.approx((-0.04, -1.04, 2.08, 1.08))


def test_quality_fill_is_uniform_on_equilateral_mesh():
    mesh = uniform_refine(TriMesh.from_arrays([(0, 0), (1, 0), (0.5, 3**0.5 / 2)], [(0, 1, 2)]), 2)
    fills = {p.get("fill") for p in polygons(render_svg(mesh, color_by="quality"))}
    assert len(fills) == 1
    assert fills == {"#{:02x}{:02x}{:02x}".format(*HIGH_RGB)}


def test_eta_ramp_endpoints(criss_cross):
    data = render_svg(criss_cross, color_by="eta", values=np.array([0.0, 1.0, 0.5, 0.0]))
    fills = [p.get("fill") for p in polygons(data)]
    assert fills[0] == "#{:02x}{:02x}{:02x}".format(*LOW_RGB)
    assert fills[1] == "#{:02x}{:02x}{:02x}".format(*HIGH_RGB)
    assert len(fills) == criss_cross.n_triangles


def test_eta_needs_values(criss_cross):
    with pytest.raises(ValueError):
        render_svg(criss_cross, color_by="eta")
    with pytest.raises(ValueError):
        render_svg(criss_cross, color_by="eta", values=np.ones(3))
    with pytest.raises(ValueError):
        render_svg(criss_cross, color_by="angle")


def test_rendering_is_deterministic(grid):
    mesh = grid(5)
    assert render_svg(mesh, color_by="quality") == render_svg(mesh, color_by="quality")


def test_quality_uses_fixed_scale(criss_cross):
    # four right isosceles triangles share one quality strictly inside (0, 1)
    fills = {p.get("fill") for p in polygons(render_svg(criss_cross, color_by="quality"))}
    assert len(fills) == 1
    assert fills.isdisjoint(
        {"#{:02x}{:02x}{:02x}".format(*LOW_RGB), "#{:02x}{:02x}{:02x}".format(*HIGH_RGB)}
    )


def test_eta_with_roundoff_spread_is_uniform(criss_cross):
    values = np.array([0.25, 0.25 + 1e-16, 0.25, 0.25 - 1e-16])
    fills = {p.get("fill") for p in polygons(render_svg(criss_cross, "eta", values))}
    assert len(fills) == 1
