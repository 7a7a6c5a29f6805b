import logging
import math
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from mesher.cdt import initial_triangulation
from mesher.errors import EmptySystemError, NonConvergenceError
from mesher.fem import ESTIMATOR_VARIANTS, assemble, estimate, mark, solve
from mesher.mesh import PolygonDomain, QualityStats, TriMesh, quality_stats
from mesher.refine import rgb_refine
from mesher.run_logger import IterationRecord, RunLogger
from mesher.smooth import SMOOTH_ORDERS, smooth

logger = logging.getLogger(__name__)

SnapshotCallback = Callable[[int, TriMesh], None]


@dataclass
class GenConfig:
    """Knobs of the adaptive meshing loop. Angles are in degrees."""

    theta: float = 0.5
    max_refinements: int = 20
    quality_target: float = 0.9
    min_angle_target: float | None = None
    smooth_max_iters: int = 20
    smooth_tol: float = 1e-3
    smooth_order: str = "flip-first"
    flip_sweep_cap: int | None = None
    solver_tol: float = 1e-10
    solver_max_iter_factor: int = 20
    estimator_variant: str = "area-squared"
    source: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        """Reject out-of-range settings with a ValueError naming the field."""
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.max_refinements < 0:
            raise ValueError("max_refinements must be >= 0")
        if not 0.0 < self.quality_target <= 1.0:
            raise ValueError(f"quality_target must lie in (0, 1], got {self.quality_target}")
        if self.min_angle_target is not None and not 0.0 < self.min_angle_target <= 60.0:
            raise ValueError("min_angle_target must lie in (0, 60] degrees")
        if self.smooth_max_iters < 0:
            raise ValueError("smooth_max_iters must be >= 0")
        if self.smooth_tol <= 0.0:
            raise ValueError("smooth_tol must be positive")
        if self.smooth_order not in SMOOTH_ORDERS:
            raise ValueError(f"smooth_order must be one of {SMOOTH_ORDERS}")
        if self.flip_sweep_cap is not None and self.flip_sweep_cap < 1:
            raise ValueError("flip_sweep_cap must be >= 1")
        if self.solver_tol <= 0.0:
            raise ValueError("solver_tol must be positive")
        if self.solver_max_iter_factor < 1:
            raise ValueError("solver_max_iter_factor must be >= 1")
        if self.estimator_variant not in ESTIMATOR_VARIANTS:
            raise ValueError(f"estimator_variant must be one of {ESTIMATOR_VARIANTS}")
        if not math.isfinite(self.source):
            raise ValueError("source must be finite")

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "GenConfig":
        """Build from a plain mapping; unknown keys are an error."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown generator settings: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: Path) -> "GenConfig":
        """Load the `generator:` section of a YAML file."""
        with open(path) as f:
            document = yaml.safe_load(f) or {}
        if not isinstance(document, dict):
            raise ValueError(f"{path}: expected a mapping at the top level")
        section = document.get("generator") or {}
        if not isinstance(section, dict):
            raise ValueError(f"{path}: 'generator' must be a mapping")
        return cls.from_mapping(section)

    def with_overrides(self, **overrides: Any) -> "GenConfig":
        """Copy with every non-None override applied (and re-validated)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class GenReport:
    """Outcome of adaptmesh; `iterations[0]` describes the initial triangulation."""

    iterations_run: int
    target_reached: bool
    wall_time: float
    iterations: list[IterationRecord] = field(default_factory=list)

    @property
    def initial(self) -> IterationRecord:
        """Record of the initial triangulation."""
        return self.iterations[0]

    @property
    def final(self) -> IterationRecord:
        """Record of the last mesh produced."""
        return self.iterations[-1]

    def to_dict(self) -> dict[str, Any]:
        """Plain dict form used for the JSON stats file."""
        return asdict(self)


def target_met(stats: QualityStats, cfg: GenConfig) -> bool:
    """Average quality target, and the average minimum angle target when set."""
    if stats.average_quality < cfg.quality_target:
        return False
    return cfg.min_angle_target is None or stats.average_min_angle_deg >= cfg.min_angle_target


def _record(
    k: int, mesh: TriMesh, stats: QualityStats, eta_max: float | None, marked: int, solver_its: int
) -> IterationRecord:
    """Summarise one iteration for the run history."""
    return IterationRecord(
        iteration=k,
        triangle_count=mesh.n_triangles,
        vertex_count=mesh.n_vertices,
        eta_max=eta_max,
        marked_count=marked,
        average_quality=stats.average_quality,
        min_quality=stats.min_quality,
        average_min_angle_deg=stats.average_min_angle_deg,
        solver_iterations=solver_its,
    )


def adaptmesh(
    domain: PolygonDomain,
    cfg: GenConfig | None = None,
    on_iteration: SnapshotCallback | None = None,
    run_logger: RunLogger | None = None,
) -> tuple[TriMesh, GenReport]:
    """
    Adaptive mesh generation: starting from the constrained Delaunay
    triangulation of the domain, repeatedly solve -lap u = f with u = 0 on the
    boundary, mark triangles with large error indicators, refine them with RGB
    closure and smooth, until the quality target holds or max_refinements
    passes have run.
    """
    cfg = cfg or GenConfig()
    history = run_logger or RunLogger()
    started = time.perf_counter()
    first = len(history.records)

    mesh = initial_triangulation(domain, seed=cfg.seed)
    stats = quality_stats(mesh)
    history.log(_record(0, mesh, stats, None, 0, 0))
    if on_iteration is not None:
        on_iteration(0, mesh)
    reached = target_met(stats, cfg)

    iterations_run = 0
    for k in range(1, cfg.max_refinements + 1):
        if reached:
            break
        solver_its = 0
        eta_max: float | None = None
        try:
            system = assemble(mesh, cfg.source)
        except EmptySystemError:
            logger.warning("Iteration %d: no interior vertices, refining every triangle", k)
            marked = set(range(mesh.n_triangles))
        else:
            try:
                sol = solve(system, cfg.solver_tol, cfg.solver_max_iter_factor * system.rhs.size)
            except NonConvergenceError as exc:
                exc.iteration = k
                raise
            errors = estimate(mesh, sol, cfg.source, cfg.estimator_variant)
            marked = mark(errors, cfg.theta)
            eta_max = errors.eta_max
            solver_its = sol.solver_iterations
        if not marked:
            logger.info("Iteration %d: no triangle marked, stopping", k)
            break

        mesh = smooth(rgb_refine(mesh, marked), cfg)
        iterations_run = k
        stats = quality_stats(mesh)
        history.log(_record(k, mesh, stats, eta_max, len(marked), solver_its))
        if on_iteration is not None:
            on_iteration(k, mesh)
        reached = target_met(stats, cfg)

    report = GenReport(
        iterations_run=iterations_run,
        target_reached=reached,
        wall_time=time.perf_counter() - started,
        iterations=history.records[first:],
    )
    if not reached:
        logger.warning(
            "Quality target %.3f not reached after %d iterations (average quality %.4f)",
            cfg.quality_target,
            iterations_run,
            report.final.average_quality,
        )
    return mesh, report
