"""Run one (config, seed) cell to completion and collect its outputs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Optional

from src.environment.field import SignalField
from src.sim import metrics
from src.sim.log import trajectory_row
from src.sim.state import MetricsRow, WorldConfig
from src.sim.world import World

logger = logging.getLogger(__name__)

FULL_COVERAGE = 1.0 - 1e-9


@dataclass
class RunResult:
    config: WorldConfig
    field_attempt: int
    metrics: list[MetricsRow] = dc_field(default_factory=list)
    trajectory: list[list[str]] = dc_field(default_factory=list)
    completion_time: Optional[float] = None
    coverage_time: Optional[float] = None
    min_separation: float = float("inf")
    max_speed: float = 0.0
    steps: int = 0
    diagnostics: dict[str, int] = dc_field(default_factory=dict)

    @property
    def final(self) -> Optional[MetricsRow]:
        return self.metrics[-1] if self.metrics else None

    @property
    def final_rms(self) -> float:
        return self.final.rms_psi if self.final else float("nan")

    @property
    def t_end(self) -> float:
        return self.steps * self.config.dt


def _record_poses(world: World, rows: list[list[str]]) -> None:
    for robot in world.robots:
        rows.append(trajectory_row(world.t, robot.id, robot.pose, robot.stack.goal.mean()))


def simulate(
    config: WorldConfig,
    field: Optional[SignalField] = None,
    stop_on_done: bool = False,
    stop_on_coverage: bool = False,
    record_trajectory: bool = True,
) -> RunResult:
    """Step the world until t_max, or earlier when a requested stop condition holds."""
    world = World.create(config, field)
    result = RunResult(config=config, field_attempt=world.field.attempt)
    psi_star = config.psi_star

    result.metrics.append(metrics.measure(world.t, world.robots, world.field, psi_star))
    if record_trajectory:
        _record_poses(world, result.trajectory)

    for _ in range(config.n_steps):
        world.step()
        if record_trajectory:
            _record_poses(world, result.trajectory)
        if world.step_index % config.cadence_steps:
            continue

        row = metrics.measure(world.t, world.robots, world.field, psi_star)
        result.metrics.append(row)
        if row.fleet_done and result.completion_time is None:
            result.completion_time = row.t
        if row.coverage >= FULL_COVERAGE and result.coverage_time is None:
            result.coverage_time = row.t
        if stop_on_done and result.completion_time is not None:
            break
        if stop_on_coverage and result.coverage_time is not None:
            break

    result.steps = world.step_index
    result.min_separation = world.min_separation
    result.max_speed = world.max_speed
    result.diagnostics = world.diagnostics()
    degraded = result.diagnostics.get("singular_marginalization", 0)
    if degraded:
        logger.debug("seed=%d: %d factor messages fell back to zero information", config.seed, degraded)
    logger.info(
        "seed=%d n_r=%d t=%.1fs completion=%s coverage_time=%s rms=%.6f",
        config.seed, config.n_r, result.t_end,
        "censored" if result.completion_time is None else f"{result.completion_time:.1f}",
        "censored" if result.coverage_time is None else f"{result.coverage_time:.1f}",
        result.final_rms,
    )
    return result
