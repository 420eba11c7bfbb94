"""CSV and JSON writers for run outputs.

Times are written with 1 decimal, metric values with 6.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from src.sim.state import MetricsRow, WorldConfig

TRAJECTORY_COLUMNS = ["t", "robot", "x", "y", "vx", "vy", "goal_x", "goal_y"]
METRICS_COLUMNS = ["t", "coverage", "rms_psi", "robots_done", "fleet_done"]


def fmt_time(t: float) -> str:
    return f"{t:.1f}"


def fmt_value(v: float) -> str:
    return f"{v:.6f}"


def trajectory_row(t: float, robot: int, pose: Sequence[float], goal: Sequence[float]) -> list[str]:
    return [fmt_time(t), str(robot)] + [fmt_value(v) for v in (*pose[:4], *goal[:2])]


def metrics_row(row: MetricsRow) -> list[str]:
    return [
        fmt_time(row.t),
        fmt_value(row.coverage),
        fmt_value(row.rms_psi),
        str(sum(row.done)),
        str(int(row.fleet_done)),
    ]


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    return path


def write_header(path: Path, config: WorldConfig, seeds: Sequence[int], **extra) -> Path:
    """Resolved config plus seeds; enough to re-run the cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"config": config.model_dump(mode="json"), "seeds": list(seeds), **extra}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
