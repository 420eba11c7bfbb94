from src.experiments.nodes.Orchestrator import experiment_dir
from src.experiments.state import CellResult, ExperimentState
from src.experiments.utils import (
    AGGREGATE_COLUMNS,
    TIMESERIES_COLUMNS,
    aggregate_rows,
    fmt_optional_time,
    run_cells,
    timeseries_rows,
)
from src.sim.log import fmt_time, fmt_value, write_csv

CELL_COLUMNS = ["seed", "coverage_time", "censored", "final_coverage", "rms_psi_at_end", "t_end", "min_separation", "max_speed"]


def coverage_rows(results: list[CellResult], keys: list[str]) -> list[list[str]]:
    """Per-cell time-to-full-coverage and end-of-run rms_psi."""
    return [
        [str(r.params.get(k)) for k in keys] + [
            str(r.seed),
            fmt_optional_time(r.coverage_time, r.t_end),
            str(int(r.coverage_censored)),
            fmt_value(r.final_coverage),
            fmt_value(r.final_rms),
            fmt_time(r.t_end),
            fmt_value(r.min_separation),
            fmt_value(r.max_speed),
        ]
        for r in results
    ]


def run_exploration(state: ExperimentState) -> tuple[list[CellResult], list[str]]:
    """Shared by every experiment that runs to t_max and scores coverage."""
    spec = state["spec"]
    out = experiment_dir(state)
    results = run_cells(state["cells"], out, spec.workers)
    keys = list(state["grid"])
    written = [
        write_csv(out / "cells.csv", keys + CELL_COLUMNS, coverage_rows(results, keys)),
        write_csv(
            out / "summary.csv",
            keys + AGGREGATE_COLUMNS,
            aggregate_rows(results, keys, lambda r: r.coverage_time),
        ),
        write_csv(out / "timeseries.csv", keys + TIMESERIES_COLUMNS, timeseries_rows(results, keys)),
    ]
    return results, [str(p) for p in written]


def coverage_node(state: ExperimentState) -> dict:
    """Coverage and rms_psi time series per N_R, run to t_max for the steady-state error."""
    results, files = run_exploration(state)
    return {"results": results, "files": state.get("files", []) + files}
