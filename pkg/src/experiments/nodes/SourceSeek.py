from src.experiments.nodes.Orchestrator import experiment_dir
from src.experiments.state import ExperimentState
from src.experiments.utils import (
    AGGREGATE_COLUMNS,
    TIMESERIES_COLUMNS,
    aggregate_rows,
    fmt_optional_time,
    run_cells,
    timeseries_rows,
)
from src.sim.log import fmt_value, write_csv

SWEEP_COLUMNS = ["n_r", "r_c", "seed", "completion_time", "censored", "min_separation", "max_speed"]


def source_seek_node(state: ExperimentState) -> dict:
    """Completion time per (N_R, r_C, seed); runs stop once every robot knows a source."""
    spec = state["spec"]
    out = experiment_dir(state)
    results = run_cells(state["cells"], out, spec.workers, stop_on_done=True)
    base = state["base"]

    rows = []
    for r in results:
        rows.append([
            str(r.params.get("n_r", base.n_r)),
            str(r.params.get("r_c", base.r_c)),
            str(r.seed),
            fmt_optional_time(r.completion_time, r.t_end),
            str(int(r.completion_censored)),
            fmt_value(r.min_separation),
            fmt_value(r.max_speed),
        ])
    sweep = write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)

    keys = list(state["grid"])
    summary = write_csv(
        out / "summary.csv",
        keys + AGGREGATE_COLUMNS,
        aggregate_rows(results, keys, lambda r: r.completion_time),
    )
    series = write_csv(out / "timeseries.csv", keys + TIMESERIES_COLUMNS, timeseries_rows(results, keys))
    return {"results": results, "files": state.get("files", []) + [str(sweep), str(summary), str(series)]}
