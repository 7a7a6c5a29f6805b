import csv
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass
class IterationRecord:
    """Mesh statistics after one pass of the adaptive loop (iteration 0 is the initial CDT)."""

    iteration: int
    triangle_count: int
    vertex_count: int
    eta_max: float | None
    marked_count: int
    average_quality: float
    min_quality: float
    average_min_angle_deg: float
    solver_iterations: int


class RunLogger:
    """Collects iteration records and persists them to JSONL or CSV."""

    def __init__(self) -> None:
        """Start with an empty history."""
        self.records: list[IterationRecord] = []
        self.logger = logging.getLogger(__name__)

    def log(self, record: IterationRecord) -> None:
        """Keep a record in memory and report it at INFO level."""
        self.records.append(record)
        eta = "n/a" if record.eta_max is None else f"{record.eta_max:.3e}"
        self.logger.info(
            "Iteration %d: triangles=%d vertices=%d eta_max=%s avg_quality=%.4f",
            record.iteration,
            record.triangle_count,
            record.vertex_count,
            eta,
            record.average_quality,
        )

    def latest(self) -> IterationRecord | None:
        """Most recent record, or None before the first one."""
        return self.records[-1] if self.records else None

    def write_jsonl(self, path: Path) -> None:
        """Write one JSON object per record."""
        with open(path, "w") as f:
            for record in self.records:
                f.write(json.dumps(asdict(record)) + "\n")

    def write_csv(self, path: Path) -> None:
        """Write all records as CSV with a header row."""
        fieldnames = [f.name for f in fields(IterationRecord)]
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames)
            writer.writeheader()
            for record in self.records:
                writer.writerow(asdict(record))

    def write(self, path: Path) -> None:
        """CSV for a .csv suffix, JSONL otherwise."""
        if path.suffix.lower() == ".csv":
            self.write_csv(path)
        else:
            self.write_jsonl(path)
        self.logger.info("Wrote %d iteration records to %s", len(self.records), path)
