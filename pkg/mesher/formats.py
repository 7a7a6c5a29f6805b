import json
import logging
from collections.abc import Iterator
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from mesher.cdt import validate_polygon
from mesher.errors import DomainParseError, PolygonError
from mesher.geometry import Point2, point_in_polygon, polygon_area
from mesher.mesh import PolygonDomain, TriMesh, edge_key

logger = logging.getLogger(__name__)

DOMAIN_FORMATS = ("json", "poly")
MESH_FORMATS = ("msh2", "json")


def _read_source(source: str | Path | TextIO, fmt: str | None) -> tuple[str, str]:
    """Return the text of a path or string source and the format to parse it with."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        text = path.read_text()
        if fmt is None:
            fmt = "poly" if path.suffix.lower() == ".poly" else "json"
    else:
        text = source.read()
        fmt = fmt or "json"
    if fmt not in DOMAIN_FORMATS:
        raise ValueError(f"unknown domain format {fmt!r}")
    return text, fmt


def _loop(value: Any, what: str) -> list[Point2]:
    """Validate one JSON loop and convert it to points."""
    if not isinstance(value, list):
        raise DomainParseError(f"{what} must be a list of [x, y] pairs")
    loop = []
    for item in value:
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in item)
        ):
            raise DomainParseError(f"{what}: expected [x, y], got {item!r}")
        loop.append(Point2(float(item[0]), float(item[1])))
    return loop


def _parse_json_domain(text: str) -> PolygonDomain:
    """Parse {"outer": [...], "holes": [[...], ...]}."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(data, dict) or "outer" not in data:
        raise DomainParseError("expected an object with an 'outer' loop")
    holes = data.get("holes", [])
    if not isinstance(holes, list):
        raise DomainParseError("'holes' must be a list of loops")
    return PolygonDomain(
        outer=_loop(data["outer"], "outer"),
        holes=[_loop(h, f"hole {i}") for i, h in enumerate(holes)],
    )


class _PolyReader:
    """Token reader over the non-comment lines of a .poly file."""

    def __init__(self, text: str) -> None:
        """Start reading the non-empty lines of a .poly text."""
        self.lines: Iterator[tuple[int, list[tuple[int, str]]]] = self._tokenize(text)

    @staticmethod
    def _tokenize(text: str) -> Iterator[tuple[int, list[tuple[int, str]]]]:
        """Yield (line number, [(column, word), ...]) per non-empty line, comments stripped."""
        for number, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0]
            tokens = []
            column = 0
            for word in body.split():
                column = body.index(word, column)
                tokens.append((column + 1, word))
                column += len(word)
            if tokens:
                yield number, tokens

    def row(self, what: str, minimum: int) -> tuple[int, list[tuple[int, str]]]:
        """Next data row with at least `minimum` tokens, as (line number, tokens)."""
        try:
            number, tokens = next(self.lines)
        except StopIteration:
            raise DomainParseError(f"unexpected end of file while reading {what}") from None
        if len(tokens) < minimum:
            raise DomainParseError(
                f"{what}: expected at least {minimum} values", number, tokens[-1][0]
            )
        return number, tokens

    @staticmethod
    def number(line: int, token: tuple[int, str], kind: type) -> Any:
        """Convert one token with `kind`, reporting its position on failure."""
        column, word = token
        try:
            return kind(word)
        except ValueError:
            raise DomainParseError(f"invalid {kind.__name__} {word!r}", line, column) from None


def _trace_loops(segments: list[tuple[int, int]], line: int) -> list[list[int]]:
    """Group the segment list into closed vertex loops."""
    adjacent: dict[int, list[int]] = {}
    for a, b in segments:
        adjacent.setdefault(a, []).append(b)
        adjacent.setdefault(b, []).append(a)
    for v in sorted(adjacent):
        if len(adjacent[v]) != 2:
            raise DomainParseError(
                f"open constraint chain: vertex {v} has {len(adjacent[v])} segments", line
            )
    loops = []
    seen: set[int] = set()
    for start in sorted(adjacent):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        previous, current = start, adjacent[start][0]
        while current != start:
            loop.append(current)
            seen.add(current)
            a, b = adjacent[current]
            previous, current = current, (b if a == previous else a)
        loops.append(loop)
    return loops


def _parse_poly_domain(text: str) -> PolygonDomain:
    """Parse a .poly file: vertices, segments, then holes given by seed points."""
    reader = _PolyReader(text)
    line, header = reader.row("vertex header", 1)
    count = reader.number(line, header[0], int)
    if count <= 0:
        raise DomainParseError("vertices in a separate .node file are not supported", line, 1)

    coords: dict[int, Point2] = {}
    first_index = None
    for _ in range(count):
        line, tokens = reader.row("vertex", 3)
        index = reader.number(line, tokens[0], int)
        if first_index is None:
            first_index = index
        if index in coords:
            raise DomainParseError(f"vertex {index} defined twice", line, tokens[0][0])
        coords[index] = Point2(
            reader.number(line, tokens[1], float), reader.number(line, tokens[2], float)
        )

    line, header = reader.row("segment header", 1)
    segments = []
    for _ in range(reader.number(line, header[0], int)):
        line, tokens = reader.row("segment", 3)
        a = reader.number(line, tokens[1], int)
        b = reader.number(line, tokens[2], int)
        for column, v in ((tokens[1][0], a), (tokens[2][0], b)):
            if v not in coords:
                raise DomainParseError(f"segment refers to unknown vertex {v}", line, column)
        segments.append((a, b))
    if not segments:
        raise DomainParseError("no segments: the domain boundary must be given as loops", line)

    seeds: list[Point2] = []
    try:
        line, header = reader.row("hole header", 1)
    except DomainParseError:
        header = []
    if header:
        for _ in range(reader.number(line, header[0], int)):
            line, tokens = reader.row("hole", 3)
            seeds.append(
                Point2(reader.number(line, tokens[1], float), reader.number(line, tokens[2], float))
            )

    logger.debug(
        "Parsed .poly: %d vertices (base %s), %d segments", count, first_index, len(segments)
    )
    loops = [[coords[v] for v in loop] for loop in _trace_loops(segments, line)]
    is_hole = [False] * len(loops)
    for seed in seeds:
        containing = [i for i, loop in enumerate(loops) if point_in_polygon(seed, loop)]
        if not containing:
            logger.warning("Hole seed %s lies outside every loop; ignored", tuple(seed))
            continue
        innermost = min(containing, key=lambda i: abs(polygon_area(loops[i])))
        is_hole[innermost] = True
    outers = [loop for loop, hole in zip(loops, is_hole) if not hole]
    if len(outers) != 1:
        raise DomainParseError(f"expected exactly one outer loop, found {len(outers)}")
    holes = [loop for loop, hole in zip(loops, is_hole) if hole]
    return PolygonDomain(outer=outers[0], holes=holes)


def parse_domain(source: str | Path | TextIO, fmt: str | None = None) -> PolygonDomain:
    """
    Read a polygonal domain from JSON (`{"outer": [...], "holes": [...]}`) or
    from the vertex/segment/hole sections of a .poly file. The format follows
    the file suffix unless given. The result is validated and normalised
    (outer loop counterclockwise, holes clockwise).
    """
    text, fmt = _read_source(source, fmt)
    domain = _parse_json_domain(text) if fmt == "json" else _parse_poly_domain(text)
    check = validate_polygon(domain)
    if not check.ok:
        raise PolygonError(check.defects)
    return check.domain


def _num(value: float) -> str:
    """Shortest round-trip text for a coordinate."""
    return repr(float(value))


def _write_msh2(mesh: TriMesh) -> str:
    """MSH 2.2 ASCII text: nodes, constrained edges as lines, then triangles."""
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_vertices)]
    for i, (x, y) in enumerate(mesh.vertices.tolist(), start=1):
        lines.append(f"{i} {_num(x)} {_num(y)} 0")
    lines.append("$EndNodes")
    constrained = sorted(mesh.constrained)
    lines += ["$Elements", str(len(constrained) + mesh.n_triangles)]
    element = 0
    for u, v in constrained:
        element += 1
        lines.append(f"{element} 1 2 1 1 {u + 1} {v + 1}")
    for a, b, c in mesh.triangles.tolist():
        element += 1
        lines.append(f"{element} 2 2 2 2 {a + 1} {b + 1} {c + 1}")
    lines.append("$EndElements")
    return "\n".join(lines) + "\n"


def _write_json(mesh: TriMesh) -> str:
    """JSON with vertices, triangles and constrained edges."""
    payload = {
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "constrained": [list(e) for e in sorted(mesh.constrained)],
    }
    return json.dumps(payload, separators=(",", ":")) + "\n"


def write_mesh(mesh: TriMesh, fmt: str = "msh2") -> bytes:
    """Serialise a mesh as Gmsh MSH 2.2 ASCII or JSON; floats use shortest round-trip repr."""
    if fmt == "msh2":
        return _write_msh2(mesh).encode()
    if fmt == "json":
        return _write_json(mesh).encode()
    raise ValueError(f"unknown mesh format {fmt!r}")


def read_mesh_json(data: bytes | str) -> TriMesh:
    """Inverse of write_mesh(..., "json")."""
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DomainParseError(exc.msg, exc.lineno, exc.colno) from exc
    try:
        vertices = np.asarray(payload["vertices"], dtype=float).reshape(-1, 2)
        triangles = np.asarray(payload["triangles"], dtype=np.int64).reshape(-1, 3)
        constrained = {edge_key(int(u), int(v)) for u, v in payload.get("constrained", [])}
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainParseError(f"malformed mesh document: {exc}") from exc
    return TriMesh.from_arrays(vertices, triangles, constrained)
