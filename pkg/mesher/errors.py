class MeshingError(Exception):
    """Base class for every error raised by the mesh generator."""


class GeometryError(MeshingError, ValueError):
    """Invalid geometric input (too few points, zero-length segment, NaN)."""


class DegenerateTriangleError(GeometryError):
    """A triangle with zero signed area was passed where a proper one is required."""


class DelaunayError(GeometryError):
    """The point set cannot be triangulated (fewer than 3 points or all collinear)."""


class NonManifoldError(MeshingError):
    """An edge is shared by three or more triangles."""

    def __init__(self, edge: tuple[int, int], count: int) -> None:
        """Keep the offending edge and how many triangles share it."""
        super().__init__(f"edge {edge} is shared by {count} triangles")
        self.edge = edge
        self.count = count


class ConstraintError(MeshingError):
    """A constrained edge cannot be recovered or the constraint loops are inconsistent."""


class PolygonError(MeshingError):
    """The input domain failed validation; carries the list of defects."""

    def __init__(self, defects: list[str]) -> None:
        """Keep every defect; the message joins them."""
        super().__init__("; ".join(defects))
        self.defects = defects


class EmptySystemError(MeshingError):
    """The mesh has no interior vertex, so the discrete problem has no unknowns."""


class NonConvergenceError(MeshingError):
    """The iterative solver hit its iteration cap before reaching the tolerance."""

    def __init__(self, iterations: int, residual: float, iteration: int | None = None) -> None:
        """Keep the solver's iteration count and final relative residual."""
        super().__init__(
            f"conjugate gradient stopped after {iterations} iterations "
            f"with relative residual {residual:.3e}"
        )
        self.iterations = iterations
        self.residual = residual
        self.iteration = iteration


class DomainParseError(MeshingError):
    """Syntax error in a domain file; line and column are 1-based."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        """Keep the 1-based position; zero means unknown."""
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.column = column
