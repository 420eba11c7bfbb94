import logging
from pathlib import Path
from typing import Literal

from src.experiments.state import ExperimentState
from src.experiments.utils import expand_cells, resolve, write_json, nest

logger = logging.getLogger(__name__)


def experiment_dir(state: ExperimentState) -> Path:
    spec = state["spec"]
    return Path(spec.output_dir) / spec.experiment


def resolve_node(state: ExperimentState) -> dict:
    """Apply presets and overrides, then validate every cell before anything runs."""
    spec = state["spec"]
    values, grid = resolve(spec)
    cells = expand_cells(values, grid, spec.seeds)
    logger.info(
        "%s: %d grid point(s) x %d seed(s)",
        spec.experiment, len(cells) // len(spec.seeds), len(spec.seeds),
    )
    return {
        "experiment": spec.experiment,
        "base": cells[0].config,
        "grid": {k.split(".")[-1]: v for k, v in grid.items()},
        "cells": cells,
        "files": [],
        "resolved": nest(values),
    }


# Router
def route_to_experiment(
    state: ExperimentState,
) -> Literal["source_seek", "coverage", "rc_sweep", "comms_failure"]:
    """Conditional edge: route on the requested experiment"""
    return {
        "source-seek": "source_seek",
        "coverage": "coverage",
        "rc-sweep": "rc_sweep",
        "comms-failure": "comms_failure",
    }[state["experiment"]]


def persist_node(state: ExperimentState) -> dict:
    """Write the resolved-config manifest next to the summary files."""
    spec = state["spec"]
    out = experiment_dir(state)
    manifest = write_json(out / "config.json", {
        "experiment": spec.experiment,
        "seeds": list(spec.seeds),
        "config": state.get("resolved", {}),
        "grid": state.get("grid", {}),
        "files": sorted(Path(f).relative_to(out).as_posix() for f in state.get("files", [])),
    })
    censored = [
        r for r in state.get("results", [])
        if (r.completion_censored if spec.experiment == "source-seek" else r.coverage_censored)
    ]
    if censored:
        logger.warning("%s: %d of %d cells censored at t_max", spec.experiment, len(censored), len(state["results"]))
    logger.info("%s: results in %s", spec.experiment, out)
    return {"manifest": str(manifest)}
