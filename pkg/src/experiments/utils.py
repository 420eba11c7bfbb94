"""Config resolution, batch execution and CSV reduction shared by the experiment nodes."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from src.config.settings import settings
from src.experiments.state import Cell, CellResult, RunSpec
from src.sim.log import (
    METRICS_COLUMNS,
    TRAJECTORY_COLUMNS,
    fmt_time,
    fmt_value,
    metrics_row,
    write_csv,
    write_header,
)
from src.sim.runner import simulate
from src.sim.state import Sigmas, WorldConfig

logger = logging.getLogger(__name__)


class ConfigRejected(ValueError):
    """Configuration could not be resolved to valid WorldConfigs."""


# Presets: config values and the sweep grid for each experiment

COVERAGE_BASE = {"d": 200.0, "init": "random", "sigma_psi": 0.1, "sigma_i": 1000.0}

PRESETS: dict[str, dict[str, Any]] = {
    "source-seek": {
        "config": {"d": 100.0, "init": "corner", "sigma_psi": 0.01, "sigma_i": 0.5},
        "grid": {"n_r": [5, 10, 15, 20], "r_c": [20.0, 40.0, 60.0]},
    },
    "coverage": {
        "config": dict(COVERAGE_BASE),
        "grid": {"n_r": [5, 10, 20]},
    },
    "rc-sweep": {
        "config": {**COVERAGE_BASE, "n_r": 20},
        "grid": {"init": ["corner", "random"], "r_c": [20.0, 50.0, 100.0]},
    },
    "comms-failure": {
        "config": {**COVERAGE_BASE, "n_r": 20, "t_max": 2000.0},
        "grid": {"alpha": [0.0, 0.25, 0.5, 0.75, 1.0]},
    },
}


def parse_override(text: str) -> tuple[str, Any]:
    """'key=value' with the value read as JSON when it parses, else as a string."""
    if "=" not in text:
        raise ConfigRejected(f"override '{text}' is not key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigRejected(f"override '{text}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigRejected(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigRejected(f"config {path} must be a JSON object")
    return data


def canonical_key(key: str) -> str:
    """Bare sigma names and 'sigmas.x' both become 'sigmas.x'."""
    if key.startswith("sigmas."):
        return key
    if key in Sigmas.model_fields:
        return f"sigmas.{key}"
    return key


def nest(values: dict[str, Any]) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    sigmas: dict[str, Any] = {}
    for key, value in values.items():
        if key == "sigmas" and isinstance(value, dict):
            sigmas.update(value)
        elif key.startswith("sigmas."):
            sigmas[key.split(".", 1)[1]] = value
        else:
            flat[key] = value
    if sigmas:
        flat["sigmas"] = sigmas
    return flat


def _validate(values: dict[str, Any]) -> WorldConfig:
    try:
        return WorldConfig.model_validate(nest(values))
    except ValidationError as e:
        raise ConfigRejected(str(e)) from e


def resolve(spec: RunSpec) -> tuple[dict[str, Any], dict[str, list]]:
    """Merge preset < spec.config and settle the sweep grid.

    A key given explicitly removes the matching preset grid axis.
    """
    preset = PRESETS[spec.experiment]
    values = {canonical_key(k): v for k, v in preset["config"].items()}
    grid = {canonical_key(k): list(v) for k, v in preset["grid"].items()}

    explicit = dict(spec.config)
    if "grid" in explicit:
        given = explicit.pop("grid")
        if not isinstance(given, dict):
            raise ConfigRejected("'grid' must map config keys to lists of values")
        grid = {canonical_key(k): list(v) if isinstance(v, list) else [v] for k, v in given.items()}
    for key, value in explicit.items():
        key = canonical_key(key)
        values[key] = value
        grid.pop(key, None)

    for key, options in grid.items():
        if not options:
            raise ConfigRejected(f"grid axis '{key}' is empty")
        if key == "seed":
            raise ConfigRejected("seeds are set with --seeds, not the grid")
    _validate(values)
    return values, grid


def expand_cells(values: dict[str, Any], grid: dict[str, list], seeds: Sequence[int]) -> list[Cell]:
    """Every grid point times every seed, all validated before anything runs."""
    keys = list(grid)
    cells = []
    for combo in product(*(grid[k] for k in keys)):
        params = {k.split(".")[-1]: v for k, v in zip(keys, combo)}
        for seed in seeds:
            config = _validate({**values, **dict(zip(keys, combo)), "seed": seed})
            cells.append(Cell(params=params, seed=seed, config=config))
    return cells


# Execution

def run_cell(cell: Cell, out_dir: Path, stop_on_done: bool, stop_on_coverage: bool, record: bool) -> CellResult:
    """Simulate one cell and write its per-cell files."""
    result = simulate(
        cell.config,
        stop_on_done=stop_on_done,
        stop_on_coverage=stop_on_coverage,
        record_trajectory=record,
    )
    cell_dir = Path(out_dir) / "cells" / cell.name
    write_csv(cell_dir / "metrics.csv", METRICS_COLUMNS, (metrics_row(r) for r in result.metrics))
    if record:
        write_csv(cell_dir / "trajectory.csv", TRAJECTORY_COLUMNS, result.trajectory)
    write_header(
        cell_dir / "run.json", cell.config, [cell.seed],
        params=cell.params, field_attempt=result.field_attempt,
    )
    final = result.final
    return CellResult(
        params=cell.params,
        seed=cell.seed,
        completion_time=result.completion_time,
        coverage_time=result.coverage_time,
        final_coverage=final.coverage if final else 0.0,
        final_rms=result.final_rms,
        min_separation=result.min_separation,
        max_speed=result.max_speed,
        t_end=result.t_end,
        field_attempt=result.field_attempt,
        degraded_messages=result.diagnostics.get("singular_marginalization", 0),
        series=[(r.t, r.coverage, r.rms_psi) for r in result.metrics],
    )


def _run_cell_args(args: tuple) -> CellResult:
    return run_cell(*args)


def run_cells(
    cells: Sequence[Cell],
    out_dir: Path,
    workers: int = 1,
    stop_on_done: bool = False,
    stop_on_coverage: bool = False,
    record: Optional[bool] = None,
) -> list[CellResult]:
    """Results come back in cell order whatever the worker count."""
    record = settings.record_trajectories if record is None else record
    jobs = [(cell, out_dir, stop_on_done, stop_on_coverage, record) for cell in cells]
    logger.info("running %d cells on %d worker(s)", len(jobs), workers)
    if workers <= 1 or len(jobs) <= 1:
        results = []
        for job in jobs:
            results.append(_run_cell_args(job))
            logger.info("cell %s done", job[0].name)
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell_args, jobs))


# Reduction

def mean_std(values: Iterable[Optional[float]]) -> tuple[float, float]:
    """Mean and population std over the finite values; NaN when none."""
    arr = np.array([v for v in values if v is not None and np.isfinite(v)], dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    return float(arr.mean()), float(arr.std())


def fmt_optional_time(t: Optional[float], t_end: float) -> str:
    """Censored times are written as the time the run ended."""
    return fmt_time(t_end if t is None else t)


def group_by(results: Sequence[CellResult], keys: Sequence[str]) -> dict[tuple, list[CellResult]]:
    groups: dict[tuple, list[CellResult]] = {}
    for r in results:
        groups.setdefault(tuple(r.params.get(k) for k in keys), []).append(r)
    return groups


def aggregate_rows(
    results: Sequence[CellResult],
    keys: Sequence[str],
    time_of: Callable[[CellResult], Optional[float]],
) -> list[list[str]]:
    """One row per grid point: keys, mean/std time over finished seeds,
    censored count, mean/std final rms, seed count."""
    rows = []
    for key, group in group_by(results, keys).items():
        t_mean, t_std = mean_std(time_of(r) for r in group)
        rms_mean, rms_std = mean_std(r.final_rms for r in group)
        censored = sum(time_of(r) is None for r in group)
        rows.append(
            [str(k) for k in key]
            + [fmt_time(t_mean), fmt_time(t_std), str(censored), fmt_value(rms_mean), fmt_value(rms_std), str(len(group))]
        )
    return rows


AGGREGATE_COLUMNS = ["mean_time", "std_time", "censored", "mean_rms_psi", "std_rms_psi", "seeds"]
TIMESERIES_COLUMNS = ["t", "mean_coverage", "mean_rms_psi", "seeds"]


def timeseries_rows(results: Sequence[CellResult], keys: Sequence[str]) -> list[list[str]]:
    """Seed-mean coverage and rms_psi per grid point and tick. A run that
    stopped early contributes only the ticks it reached."""
    rows = []
    for key, group in group_by(results, keys).items():
        by_t: dict[str, list[tuple[float, float]]] = {}
        for r in group:
            for t, cov, rms in r.series:
                by_t.setdefault(fmt_time(t), []).append((cov, rms))
        for t, vals in sorted(by_t.items(), key=lambda item: float(item[0])):
            arr = np.array(vals)
            rows.append(
                [str(k) for k in key]
                + [t, fmt_value(arr[:, 0].mean()), fmt_value(arr[:, 1].mean()), str(len(vals))]
            )
    return rows


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    return path
