import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from mesher.driver import GenConfig, GenReport, SnapshotCallback, adaptmesh
from mesher.errors import (
    DomainParseError,
    EmptySystemError,
    MeshingError,
    NonConvergenceError,
    PolygonError,
)
from mesher.fem import ESTIMATOR_VARIANTS, assemble, estimate, solve
from mesher.formats import DOMAIN_FORMATS, MESH_FORMATS, parse_domain, write_mesh
from mesher.mesh import TriMesh
from mesher.run_logger import RunLogger
from mesher.svg import COLOR_MODES, render_svg

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_SOLVER_FAILURE = 3
EXIT_TARGET_UNMET = 4

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for the `mesher` command."""
    parser = argparse.ArgumentParser(
        prog="mesher",
        description="Adaptive-FEM triangular mesh generator for polygonal domains",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log debug detail")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only log warnings")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("generate", help="Mesh a polygon domain file")
    gen.add_argument("input", type=Path, help="Domain file (.json or .poly)")
    gen.add_argument("--format", choices=DOMAIN_FORMATS, help="Input format (default: by suffix)")
    gen.add_argument("--config", type=Path, help="YAML file with a 'generator' section")
    gen.add_argument("--theta", type=float, help="Marking threshold in (0, 1)")
    gen.add_argument("--max-refinements", type=int, help="Maximum adaptive iterations")
    gen.add_argument("--quality", type=float, help="Average quality target in (0, 1]")
    gen.add_argument("--min-angle-target", type=float, help="Average minimum angle target (deg)")
    gen.add_argument("--smooth-iters", type=int, help="Flip/smooth rounds per iteration")
    gen.add_argument("--estimator", choices=ESTIMATOR_VARIANTS, help="Element residual term")
    gen.add_argument("--seed", type=int, help="Insertion-order seed for the initial CDT")
    gen.add_argument("--output", type=Path, help="Mesh output path")
    gen.add_argument("--output-format", choices=MESH_FORMATS, help="Default: by output suffix")
    gen.add_argument("--svg", type=Path, help="Write an SVG rendering of the final mesh")
    gen.add_argument("--svg-color", choices=COLOR_MODES, default="none", help="SVG fill scalar")
    gen.add_argument("--snapshots", type=Path, help="Directory for one SVG per iteration")
    gen.add_argument("--stats", type=Path, help="Write the run report as JSON")
    gen.add_argument("--history", type=Path, help="Iteration history (.csv or JSONL)")
    gen.add_argument(
        "--strict", action="store_true", help="Exit 4 when the quality target is not reached"
    )
    return parser


def _load_config(args: argparse.Namespace) -> GenConfig:
    """Defaults, then the YAML file, then explicit flags."""
    base = GenConfig.from_yaml(args.config) if args.config else GenConfig()
    return base.with_overrides(
        theta=args.theta,
        max_refinements=args.max_refinements,
        quality_target=args.quality,
        min_angle_target=args.min_angle_target,
        smooth_max_iters=args.smooth_iters,
        estimator_variant=args.estimator,
        seed=args.seed,
    )


def _render(mesh: TriMesh, color_by: str, cfg: GenConfig) -> bytes:
    """SVG bytes for the mesh; eta colouring solves the Poisson problem on it first."""
    if color_by != "eta":
        return render_svg(mesh, color_by=color_by)
    try:
        system = assemble(mesh, cfg.source)
        sol = solve(system, cfg.solver_tol, cfg.solver_max_iter_factor * system.rhs.size)
        eta = estimate(mesh, sol, cfg.source, cfg.estimator_variant).eta
    except EmptySystemError:
        eta = np.zeros(mesh.n_triangles)
    return render_svg(mesh, color_by="eta", values=eta)


def _snapshot_writer(directory: Path, color_by: str, cfg: GenConfig) -> SnapshotCallback:
    """Callback that writes iter_XXX.svg into directory for each iteration."""
    directory.mkdir(parents=True, exist_ok=True)

    def write(k: int, mesh: TriMesh) -> None:
        """Write the snapshot for iteration k."""
        (directory / f"iter_{k:03d}.svg").write_bytes(_render(mesh, color_by, cfg))

    return write


def _write_outputs(
    args: argparse.Namespace, cfg: GenConfig, mesh: TriMesh, report: GenReport, history: RunLogger
) -> None:
    """Write the mesh, drawing, report and history files that were asked for."""
    if args.output:
        fmt = args.output_format or ("json" if args.output.suffix.lower() == ".json" else "msh2")
        args.output.write_bytes(write_mesh(mesh, fmt))
        logger.info("Wrote %s mesh to %s", fmt, args.output)
    if args.svg:
        args.svg.write_bytes(_render(mesh, args.svg_color, cfg))
    if args.stats:
        args.stats.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if args.history:
        history.write(args.history)


def generate(args: argparse.Namespace) -> int:
    """Run the adaptive mesher for one input file and write the requested outputs."""
    try:
        cfg = _load_config(args)
        domain = parse_domain(args.input, args.format)
    except PolygonError as exc:
        for defect in exc.defects:
            logger.error("%s: %s", args.input, defect)
        return EXIT_INVALID_INPUT
    except (DomainParseError, ValueError, OSError, yaml.YAMLError) as exc:
        logger.error("%s: %s", args.input, exc)
        return EXIT_INVALID_INPUT

    history = RunLogger()
    try:
        on_iteration = None
        if args.snapshots:
            on_iteration = _snapshot_writer(args.snapshots, args.svg_color, cfg)
        mesh, report = adaptmesh(domain, cfg, on_iteration=on_iteration, run_logger=history)
        _write_outputs(args, cfg, mesh, report, history)
    except NonConvergenceError as exc:
        where = f"iteration {exc.iteration}" if exc.iteration is not None else "eta colouring"
        logger.error("Solver failed in %s: %s", where, exc)
        return EXIT_SOLVER_FAILURE
    except MeshingError as exc:
        logger.error("Meshing failed: %s", exc)
        return EXIT_INVALID_INPUT
    except OSError as exc:
        logger.error("Cannot write output: %s", exc)
        return EXIT_INVALID_INPUT

    final = report.final
    print(
        f"{args.input}: {final.triangle_count} triangles, {final.vertex_count} vertices, "
        f"average quality {final.average_quality:.4f} after {report.iterations_run} iterations"
    )
    if args.strict and not report.target_reached:
        logger.error("Quality target %.3f not reached", cfg.quality_target)
        return EXIT_TARGET_UNMET
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    """CLI entrypoint."""
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
        stream=sys.stderr,
    )
    if args.command == "generate":
        return generate(args)
    return EXIT_INVALID_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
