"""Goal layer: a single 2-D goal variable pulled by the signal and exploration
factors and pushed apart from neighbours' goals."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from src.gbp.factorgraph import FactorGraph, RemoteLink, VariableNode
from src.layers.factors import (
    GOAL_DIM,
    InfoSnapshot,
    exploration_factor,
    goal_diversity_factor,
    signal_factor,
    unary_prior,
)
from src.sim.state import Sigmas

logger = logging.getLogger(__name__)


def goal_var_id(robot: int) -> str:
    return f"r{robot}/goal"


def diversity_id(robot: int, peer: int) -> str:
    return f"r{robot}/goal/diversity/r{peer}"


class GoalLayer:
    def __init__(
        self,
        robot_id: int,
        start: np.ndarray,
        d: float,
        r_d: float,
        sigmas: Sigmas,
        explored_threshold: float = 0.5,
        damping: float = 0.0,
    ):
        self.robot_id = robot_id
        self.d = d
        self.r_d = r_d
        self.sigmas = sigmas
        self.explored_threshold = explored_threshold
        self.graph = FactorGraph(f"r{robot_id}/goal", damping)
        self.peers: set[int] = set()
        self.signal_target: Optional[int] = None
        self.exploration_target: Optional[int] = None
        self._random_target: Optional[int] = None

        start = np.asarray(start, dtype=float)[:GOAL_DIM]
        self.var = self.graph.add_variable(VariableNode(self.var_id, GOAL_DIM, linearization_point=start))
        self.graph.replace_factor(
            unary_prior(f"{self.var_id}/prior", self.var_id, start, [sigmas.sigma_goal_prior] * GOAL_DIM),
            prime=True,
        )

    @property
    def var_id(self) -> str:
        return goal_var_id(self.robot_id)

    def refresh(self, snapshot: InfoSnapshot, p0: np.ndarray, rng: np.random.Generator) -> None:
        """Rebuild the signal and exploration pulls from this tick's snapshot."""
        f, m = signal_factor(f"{self.var_id}/signal", self.var_id, snapshot, self.sigmas.sigma_i)
        self.graph.replace_factor(f, prime=True)
        self.signal_target = m

        # A random target is kept until reached or until some region becomes unexplored again.
        keep = None
        if self._random_target is not None and np.all(snapshot.zeta >= self.explored_threshold):
            reached = np.linalg.norm(snapshot.centers[self._random_target] - np.asarray(p0)[:2]) <= self.r_d / 2
            keep = None if reached else self._random_target

        f, m, drawn = exploration_factor(
            f"{self.var_id}/exploration", self.var_id, snapshot, np.asarray(p0)[:2],
            self.sigmas.sigma_e, rng, self.explored_threshold, target=keep,
        )
        self.graph.replace_factor(f, prime=True)
        if drawn and keep is None:
            logger.debug("%s: all regions explored, random target %d", self.var_id, m)
        self._random_target = m if drawn else None
        self.exploration_target = m

    def connect(self, peer: int) -> Optional[str]:
        if peer in self.peers:
            return None
        fid = diversity_id(self.robot_id, peer)
        link = RemoteLink(peer=peer, var_id=goal_var_id(peer), mirror_id=diversity_id(peer, self.robot_id))
        X0 = np.concatenate([self.var.point(), self.var.point()])
        self.graph.add_factor(goal_diversity_factor(
            fid, self.var_id, link.var_id, self.r_d, self.sigmas.sigma_g,
            remote=link, linearization_point=X0,
        ))
        self.peers.add(peer)
        return fid

    def disconnect(self, peer: int) -> None:
        if peer in self.peers:
            self.graph.remove_factor(diversity_id(self.robot_id, peer))
            self.peers.discard(peer)

    def mean(self) -> np.ndarray:
        """Goal belief mean projected into the environment."""
        return np.clip(self.var.point(), 0.0, self.d)
