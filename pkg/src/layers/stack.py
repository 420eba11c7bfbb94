"""One robot's GBP stack: Information, Goal and Planning graphs plus its pose."""
from __future__ import annotations

from typing import Literal

import numpy as np

from src.gbp.factorgraph import FactorGraph
from src.layers.goal import GoalLayer
from src.layers.information import InformationLayer
from src.layers.planning import PlanningLayer
from src.sim.state import WorldConfig

Layer = Literal["info", "goal", "plan"]
LAYERS: tuple[Layer, ...] = ("info", "goal", "plan")


class RobotStack:
    def __init__(self, robot_id: int, config: WorldConfig, centers: np.ndarray, position: np.ndarray):
        self.robot_id = robot_id
        self.config = config
        self.pose = np.concatenate([np.asarray(position, dtype=float)[:2], np.zeros(2)])
        s = config.sigmas
        self.info = InformationLayer(robot_id, centers, s, config.damping)
        self.goal = GoalLayer(robot_id, self.pose, config.d, config.r_d, s, config.explored_threshold, config.damping)
        self.planning = PlanningLayer(
            robot_id, self.pose, config.horizon_steps, config.dt, config.safety_distance, s, config.damping,
        )

    @property
    def position(self) -> np.ndarray:
        return self.pose[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.pose[2:]

    def graph(self, layer: Layer) -> FactorGraph:
        if layer == "info":
            return self.info.graph
        if layer == "goal":
            return self.goal.graph
        if layer == "plan":
            return self.planning.graph
        raise KeyError(f"unknown layer {layer!r}")

    def graphs(self) -> dict[Layer, FactorGraph]:
        return {layer: self.graph(layer) for layer in LAYERS}

    def connect(self, peer: int) -> None:
        self.info.connect(peer)
        self.goal.connect(peer)
        self.planning.connect(peer)

    def disconnect(self, peer: int) -> None:
        self.info.disconnect(peer)
        self.goal.disconnect(peer)
        self.planning.disconnect(peer)

    def set_comms(self, failed: set[int]) -> None:
        """Freeze Information/Goal links touching a failed robot; planning links stay up."""
        self_failed = self.robot_id in failed
        for layer in ("info", "goal"):
            for f in self.graph(layer).inter_robot_factors():
                f.active = not (self_failed or f.remote.peer in failed)

    def advance(self, dt: float, v_max: float) -> np.ndarray:
        """Move along the plan for one step and re-anchor both ends of the horizon."""
        velocity = self.planning.next_velocity(v_max)
        position = self.position + dt * velocity
        self.pose = np.concatenate([position, velocity])
        self.planning.reanchor(self.pose)
        self.planning.couple_horizon(self.goal.mean(), v_max)
        return self.pose

    def inter_robot_factor_count(self) -> int:
        return sum(len(g.inter_robot_factors()) for g in self.graphs().values())
