from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Sigmas(BaseModel):
    """Standard deviations behind every factor precision."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Information layer
    sigma_p: float = Field(1e-5, gt=0, description="Sensor position std (m).")
    sigma_zeta: float = Field(1e-5, gt=0, description="Sensor coverage std.")
    sigma_psi: float = Field(0.01, gt=0, description="Sensor signal std used for the factor precision.")
    sensing_noise: Optional[float] = Field(
        None, ge=0,
        description="Std of the noise actually added to samples. None means sigma_psi."
    )
    sigma_c: float = Field(1.0, gt=0, description="Consensus factor std.")
    sigma_prior: float = Field(10.0, gt=0, description="Initial psi/zeta prior std.")

    # Goal layer
    sigma_i: float = Field(0.5, gt=0, description="Signal factor std (m).")
    sigma_e: float = Field(0.1, gt=0, description="Exploration factor std (m).")
    sigma_g: float = Field(0.01, gt=0, description="Goal diversity factor std.")
    sigma_goal_prior: float = Field(1e3, gt=0, description="Weak anchor on the initial goal (m).")

    # Planning layer
    sigma_d: float = Field(2.0, gt=0, description="Dynamics process noise (m/s^1.5).")
    sigma_r: float = Field(0.01, gt=0, description="Inter-robot collision factor std.")
    sigma_anchor: float = Field(1e-3, gt=0, description="Anchor on the current state.")
    sigma_horizon: float = Field(1e-3, gt=0, description="Anchor on the horizon velocity.")

    @property
    def noise(self) -> float:
        return self.sigma_psi if self.sensing_noise is None else self.sensing_noise


class WorldConfig(BaseModel):
    """Every simulation parameter, defaulting to the source-seeking setup."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_r: int = Field(10, ge=1, description="Robot count.")
    d: float = Field(100.0, gt=0, description="Environment side length (m).")
    r_d: float = Field(10.0, gt=0, description="Region width (m).")
    r_c: float = Field(40.0, gt=0, description="Communication radius (m).")
    r_s: float = Field(10.0, gt=0, description="Sampling radius (m).")
    r_r: float = Field(1.0, gt=0, description="Robot radius (m).")
    v_max: float = Field(5.0, gt=0, description="Maximum speed (m/s).")
    dt: float = Field(0.1, gt=0, description="Simulation and planning timestep (s).")
    t_c_info_goal: float = Field(1.0, gt=0, description="Information/Goal cadence (s).")
    horizon_t: float = Field(1.0, gt=0, description="Planning horizon (s).")
    n_i: int = Field(5, ge=0, description="GBP iterations per layer per step.")
    alpha: float = Field(0.0, ge=0, le=1, description="Comms-failure fraction.")
    t_max: float = Field(1000.0, gt=0, description="Simulated time limit (s).")
    seed: int = 0
    init: Literal["corner", "random"] = "corner"

    psi_star: float = Field(10 / 255, gt=0, lt=1, description="Source threshold.")
    explored_threshold: float = Field(0.5, gt=0, lt=1)
    damping: float = Field(0.0, ge=0, lt=1)
    c_safety: float = Field(2.2, gt=0)

    octaves: int = Field(4, ge=1)
    persistence: float = Field(0.5, gt=0)
    frequency: Optional[float] = Field(None, gt=0, description="Base Perlin frequency; None means 2/D.")

    sigmas: Sigmas = Field(default_factory=Sigmas)

    @model_validator(mode="after")
    def _check_grid_and_cadence(self):
        ratio = self.d / self.r_d
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"d={self.d} is not divisible by r_d={self.r_d}")
        for name in ("t_c_info_goal", "horizon_t"):
            steps = getattr(self, name) / self.dt
            if steps < 1 or abs(steps - round(steps)) > 1e-9:
                raise ValueError(f"{name}={getattr(self, name)} is not a multiple of dt={self.dt}")
        return self

    @property
    def horizon_steps(self) -> int:
        """H: number of planning states including the current one."""
        return int(round(self.horizon_t / self.dt)) + 1

    @property
    def cadence_steps(self) -> int:
        return int(round(self.t_c_info_goal / self.dt))

    @property
    def safety_distance(self) -> float:
        return 2.0 * self.r_r * self.c_safety

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


class MetricsRow(BaseModel):
    t: float
    coverage: float = Field(..., ge=0.0, le=1.0)
    rms_psi: float = Field(..., ge=0.0)
    done: list[bool]
    fleet_done: bool
