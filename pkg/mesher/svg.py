import logging
import xml.etree.ElementTree as ET

import numpy as np

from mesher.geometry import triangle_qualities
from mesher.mesh import TriMesh

logger = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
COLOR_MODES = ("none", "quality", "eta")
# endpoints of the linear fill ramp, low value -> high value
LOW_RGB = (49, 54, 149)
HIGH_RGB = (215, 48, 39)
PLAIN_FILL = "#f2f2f2"
# relative spread below which a scalar field is drawn in one colour
UNIFORM_SPREAD = 1e-12


def _ramp(t: float) -> str:
    """Colour at position t in [0, 1] along the fill ramp."""
    r, g, b = (round(lo + (hi - lo) * t) for lo, hi in zip(LOW_RGB, HIGH_RGB))
    return f"#{r:02x}{g:02x}{b:02x}"


def _fills(mesh: TriMesh, color_by: str, values: np.ndarray | None) -> list[str]:
    """One fill colour per triangle."""
    if color_by == "none":
        return [PLAIN_FILL] * mesh.n_triangles
    if color_by == "quality":
        values = triangle_qualities(mesh.vertices, mesh.triangles)
    elif values is None:
        raise ValueError("color_by='eta' needs one value per triangle")
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_triangles,):
        raise ValueError(f"expected {mesh.n_triangles} values, got shape {values.shape}")
    if color_by == "quality":
        # quality lies in [0, 1]
        lo, hi = 0.0, 1.0
    else:
        lo, hi = float(values.min()), float(values.max())
    if hi - lo <= UNIFORM_SPREAD * max(1.0, abs(hi)):
        return [_ramp(0.5)] * mesh.n_triangles
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return [_ramp(float(t)) for t in scaled]


def render_svg(mesh: TriMesh, color_by: str = "none", values: np.ndarray | None = None) -> bytes:
    """
    Standalone SVG drawing of the mesh, one polygon per triangle. The y axis
    points up (coordinates are mirrored), the viewBox is the bounding box
    padded by 2% of its larger side, and fills map the chosen per-triangle
    scalar linearly onto a blue-to-red ramp: quality over [0, 1], eta over
    its own range.
    """
    if color_by not in COLOR_MODES:
        raise ValueError(f"color_by must be one of {COLOR_MODES}")
    fills = _fills(mesh, color_by, values)
    pts = mesh.vertices
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1])) or 1.0
    pad = 0.02 * extent
    stroke = 0.002 * extent
    view = [
        float(v)
        for v in (lo[0] - pad, -hi[1] - pad, hi[0] - lo[0] + 2 * pad, hi[1] - lo[1] + 2 * pad)
    ]

    ET.register_namespace("", SVG_NS)
    root = ET.Element(
        f"{{{SVG_NS}}}svg",
        {
            "viewBox": " ".join(repr(v) for v in view),
            "width": "800",
            "height": repr(round(800 * view[3] / view[2], 3)),
        },
    )
    group = ET.SubElement(
        root,
        f"{{{SVG_NS}}}g",
        {"stroke": "#222222", "stroke-width": repr(stroke), "stroke-linejoin": "round"},
    )
    coords = pts.tolist()
    for tri, fill in zip(mesh.triangles.tolist(), fills):
        points = " ".join(f"{coords[v][0]!r},{-coords[v][1]!r}" for v in tri)
        ET.SubElement(group, f"{{{SVG_NS}}}polygon", {"points": points, "fill": fill})
    logger.debug("Rendered %d triangles to SVG (color_by=%s)", mesh.n_triangles, color_by)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)
