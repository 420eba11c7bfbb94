from src.experiments.nodes.Coverage import run_exploration
from src.experiments.nodes.Orchestrator import experiment_dir
from src.experiments.state import CellResult, ExperimentState
from src.experiments.utils import group_by, mean_std
from src.sim.log import fmt_time, fmt_value, write_csv


def table_rows(results: list[CellResult], rows_key: str, cols_key: str) -> tuple[list[str], list[list[str]]]:
    """Wide table: one row per (quantity, row value), one column per column value."""
    row_values = list(dict.fromkeys(r.params.get(rows_key) for r in results))
    col_values = list(dict.fromkeys(r.params.get(cols_key) for r in results))
    groups = group_by(results, [rows_key, cols_key])

    header = ["quantity", rows_key] + [f"{cols_key}={c:g}" if isinstance(c, float) else f"{cols_key}={c}" for c in col_values]
    rows = []
    for quantity, pick, fmt in (
        ("coverage_time", lambda r: r.coverage_time, fmt_time),
        ("rms_psi", lambda r: r.final_rms, fmt_value),
    ):
        for rv in row_values:
            cells = []
            for cv in col_values:
                mean, _ = mean_std(pick(r) for r in groups.get((rv, cv), []))
                cells.append(fmt(mean))
            rows.append([quantity, str(rv)] + cells)
    return header, rows


def rc_sweep_node(state: ExperimentState) -> dict:
    """Coverage time and steady-state rms_psi over r_C for both start layouts."""
    results, files = run_exploration(state)
    keys = list(state["grid"])
    if len(keys) == 2:
        rows_key = "init" if "init" in keys else keys[0]
        cols_key = next(k for k in keys if k != rows_key)
        header, rows = table_rows(results, rows_key, cols_key)
        files.append(str(write_csv(experiment_dir(state) / "table.csv", header, rows)))
    return {"results": results, "files": state.get("files", []) + files}
