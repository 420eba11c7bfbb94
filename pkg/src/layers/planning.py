"""Planning layer: H states [x, y, vx, vy] spaced dt apart, the first anchored
at the robot's pose and the last velocity-anchored toward the goal."""
from __future__ import annotations

from typing import Optional

import numpy as np

from src.gbp.factorgraph import FactorGraph, RemoteLink, VariableNode
from src.layers.factors import (
    PLAN_DIM,
    dynamics_factor,
    horizon_velocity_factor,
    interrobot_collision_factor,
    unary_prior,
)
from src.sim.state import Sigmas

ARRIVAL_DISTANCE = 1e-6
# clockwise turn of the goal heading while another robot blocks the plan
GIVE_WAY_ANGLE = np.deg2rad(30.0)


def horizon_goal_coupling(horizon_pos: np.ndarray, goal_mean: np.ndarray, v_max: float) -> np.ndarray:
    """Velocity of magnitude v_max from the horizon position toward the goal."""
    delta = np.asarray(goal_mean, dtype=float)[:2] - np.asarray(horizon_pos, dtype=float)[:2]
    dist = float(np.linalg.norm(delta))
    if dist < ARRIVAL_DISTANCE:
        return np.zeros(2)
    return v_max * delta / dist


def give_way(velocity: np.ndarray, angle: float = GIVE_WAY_ANGLE) -> np.ndarray:
    """Rotate clockwise, so two robots meeting head-on both veer to their right."""
    c, s = np.cos(angle), np.sin(angle)
    vx, vy = np.asarray(velocity, dtype=float)[:2]
    return np.array([c * vx + s * vy, -s * vx + c * vy])


def clamp_speed(velocity: np.ndarray, v_max: float) -> np.ndarray:
    velocity = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(velocity))
    if speed > v_max:
        return velocity * (v_max / speed)
    return velocity


def plan_var_id(robot: int, k: int) -> str:
    return f"r{robot}/plan/{k}"


def collision_id(robot: int, k: int, peer: int) -> str:
    return f"r{robot}/plan/{k}/collision/r{peer}"


class PlanningLayer:
    def __init__(
        self,
        robot_id: int,
        pose: np.ndarray,
        horizon_steps: int,
        dt: float,
        safety_distance: float,
        sigmas: Sigmas,
        damping: float = 0.0,
    ):
        if horizon_steps < 2:
            raise ValueError(f"planning horizon needs at least 2 states, got {horizon_steps}")
        self.robot_id = robot_id
        self.horizon_steps = horizon_steps
        self.dt = dt
        self.safety_distance = safety_distance
        self.sigmas = sigmas
        self.graph = FactorGraph(f"r{robot_id}/plan", damping)
        self.peers: set[int] = set()

        pose = np.asarray(pose, dtype=float)
        for k in range(horizon_steps):
            self.graph.add_variable(VariableNode(self.var_id(k), PLAN_DIM, linearization_point=pose))
        for k in range(horizon_steps - 1):
            self.graph.add_factor(dynamics_factor(
                f"{self.var_id(k)}/dynamics", self.var_id(k), self.var_id(k + 1), dt, sigmas.sigma_d,
            ))
        self.reanchor(pose)
        self.set_horizon_velocity(pose[2:])

    def var_id(self, k: int) -> str:
        return plan_var_id(self.robot_id, k)

    @property
    def horizon_id(self) -> str:
        return self.var_id(self.horizon_steps - 1)

    def reanchor(self, pose: np.ndarray) -> None:
        """Pin state 0 to the robot's actual pose."""
        f = unary_prior(
            f"{self.var_id(0)}/anchor", self.var_id(0), pose,
            [self.sigmas.sigma_anchor] * PLAN_DIM, kind="anchor",
        )
        self.graph.replace_factor(f, prime=True)

    def set_horizon_velocity(self, velocity: np.ndarray) -> np.ndarray:
        f = horizon_velocity_factor(
            f"{self.horizon_id}/horizon", self.horizon_id, velocity, self.sigmas.sigma_horizon,
        )
        self.graph.replace_factor(f, prime=True)
        return np.asarray(velocity, dtype=float)

    def blocked(self) -> bool:
        """Some collision hinge was inside its radius at the last linearisation."""
        return any(
            f.likelihood is not None and not f.likelihood.is_zero()
            for f in self.graph.inter_robot_factors()
        )

    def couple_horizon(self, goal_mean: np.ndarray, v_max: float) -> np.ndarray:
        horizon_pos = self.graph.variables[self.horizon_id].point()[:2]
        velocity = horizon_goal_coupling(horizon_pos, goal_mean, v_max)
        if self.blocked():
            velocity = give_way(velocity)
        return self.set_horizon_velocity(velocity)

    def next_velocity(self, v_max: float) -> np.ndarray:
        """Velocity of the next planned state, limited to v_max."""
        return clamp_speed(self.graph.variables[self.var_id(1)].point()[2:], v_max)

    def connect(self, peer: int) -> list[str]:
        if peer in self.peers:
            return []
        created = []
        for k in range(self.horizon_steps):
            fid = collision_id(self.robot_id, k, peer)
            link = RemoteLink(peer=peer, var_id=plan_var_id(peer, k), mirror_id=collision_id(peer, k, self.robot_id))
            point = self.graph.variables[self.var_id(k)].point()
            self.graph.add_factor(interrobot_collision_factor(
                fid, self.var_id(k), link.var_id, self.safety_distance, self.sigmas.sigma_r,
                remote=link, linearization_point=np.concatenate([point, point]),
            ))
            created.append(fid)
        self.peers.add(peer)
        return created

    def disconnect(self, peer: int) -> None:
        if peer not in self.peers:
            return
        for k in range(self.horizon_steps):
            self.graph.remove_factor(collision_id(self.robot_id, k, peer))
        self.peers.discard(peer)

    def states(self) -> np.ndarray:
        return np.array([self.graph.variables[self.var_id(k)].point() for k in range(self.horizon_steps)])

    def state(self, k: int) -> Optional[np.ndarray]:
        return self.graph.variables[self.var_id(k)].mean()
