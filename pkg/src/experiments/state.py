from pathlib import Path
from typing import Any, Literal, Optional, TypedDict

from pydantic import BaseModel, ConfigDict, Field

from src.config.settings import settings
from src.sim.state import WorldConfig

ExperimentKind = Literal["source-seek", "coverage", "rc-sweep", "comms-failure"]


class RunSpec(BaseModel):
    """What the user asked for, before presets are applied."""
    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentKind
    config: dict[str, Any] = Field(
        default_factory=dict,
        description="Flat overrides; 'sigmas.x' or a bare sigma name reaches the nested sigmas, "
        "'grid' replaces the preset sweep grid."
    )
    seeds: list[int] = Field(default_factory=lambda: list(settings.default_seeds), min_length=1)
    output_dir: Path = Field(default_factory=lambda: settings.output_dir)
    workers: int = Field(default_factory=lambda: settings.workers, ge=1)


class Cell(BaseModel):
    """One (grid point, seed) simulation."""
    model_config = ConfigDict(frozen=True)

    params: dict[str, Any]
    seed: int
    config: WorldConfig

    @property
    def name(self) -> str:
        parts = [f"{k}={v}" for k, v in self.params.items()]
        return "_".join(parts + [f"seed={self.seed}"])


class CellResult(BaseModel):
    params: dict[str, Any]
    seed: int
    completion_time: Optional[float] = None
    coverage_time: Optional[float] = None
    final_coverage: float
    final_rms: float
    min_separation: float
    max_speed: float
    t_end: float
    field_attempt: int = 0
    degraded_messages: int = 0
    series: list[tuple[float, float, float]] = Field(
        default_factory=list, description="(t, coverage, rms_psi) at every cadence tick."
    )

    @property
    def completion_censored(self) -> bool:
        return self.completion_time is None

    @property
    def coverage_censored(self) -> bool:
        return self.coverage_time is None


class ExperimentState(TypedDict, total=False):
    """Root graph state"""
    spec: RunSpec

    # Set by resolve
    experiment: ExperimentKind
    resolved: dict[str, Any]
    base: WorldConfig
    grid: dict[str, list]
    cells: list[Cell]

    # Set by the experiment node
    results: list[CellResult]
    files: list[str]

    # Set by persist
    manifest: str
