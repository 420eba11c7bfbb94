"""Information layer: one robot's copy of the global state, one
[p, psi, zeta] variable per region."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from src.environment.field import Sample
from src.gbp.factorgraph import FactorGraph, RemoteLink, VariableNode
from src.layers.factors import (
    INFO_DIM,
    PSI,
    ZETA,
    InfoSnapshot,
    consensus_factor,
    retained_factor,
    sensor_factor,
    unary_prior,
)
from src.sim.state import Sigmas

INITIAL_PSI = 1.0
INITIAL_ZETA = 0.0


def info_var_id(robot: int, m: int) -> str:
    return f"r{robot}/info/{m}"


def consensus_id(robot: int, m: int, peer: int) -> str:
    return f"r{robot}/info/{m}/consensus/r{peer}"


class InformationLayer:
    def __init__(self, robot_id: int, centers: np.ndarray, sigmas: Sigmas, damping: float = 0.0):
        self.robot_id = robot_id
        self.centers = np.asarray(centers, dtype=float)
        self.sigmas = sigmas
        self.graph = FactorGraph(f"r{robot_id}/info", damping)
        self.active_regions: set[int] = set()
        self.consensus: dict[int, dict[int, str]] = {}

        prior_std = [sigmas.sigma_p, sigmas.sigma_p, sigmas.sigma_prior, sigmas.sigma_prior]
        for m, (cx, cy) in enumerate(self.centers):
            initial = [cx, cy, INITIAL_PSI, INITIAL_ZETA]
            v = self.graph.add_variable(VariableNode(self.var_id(m), INFO_DIM, linearization_point=initial))
            v.active = False
            self.graph.replace_factor(unary_prior(self.prior_id(m), v.id, initial, prior_std), prime=True)

    @property
    def n_m(self) -> int:
        return len(self.centers)

    def var_id(self, m: int) -> str:
        return info_var_id(self.robot_id, m)

    def prior_id(self, m: int) -> str:
        return f"{self.var_id(m)}/prior"

    def sensor_id(self, m: int) -> str:
        return f"{self.var_id(m)}/sensor"

    def apply_samples(self, samples: Sequence[Sample]) -> None:
        """One sensor factor per region; a new sample replaces the old one."""
        s = self.sigmas
        for sample in samples:
            if not 0 <= sample.region < self.n_m:
                raise ValueError(f"region {sample.region} outside environment")
            f = sensor_factor(
                self.sensor_id(sample.region), self.var_id(sample.region), sample,
                s.sigma_p, s.sigma_psi, s.sigma_zeta,
            )
            self.graph.replace_factor(f, prime=True)

    def activate(self, regions: Iterable[int]) -> None:
        self.active_regions = set(regions)
        for m in range(self.n_m):
            self.graph.variables[self.var_id(m)].active = m in self.active_regions
        for peer in self.consensus:
            self.connect(peer)

    def retained_id(self, m: int, peer: int) -> str:
        return f"{self.var_id(m)}/retained/r{peer}"

    def connect(self, peer: int) -> list[str]:
        """Consensus factors to `peer` for every currently active region.

        What a region kept from an earlier link to the same peer is handed to
        the new factor, which overwrites it on its first round.
        """
        existing = self.consensus.setdefault(peer, {})
        created = []
        for m in sorted(self.active_regions - existing.keys()):
            fid = consensus_id(self.robot_id, m, peer)
            link = RemoteLink(peer=peer, var_id=info_var_id(peer, m), mirror_id=consensus_id(peer, m, self.robot_id))
            self.graph.add_factor(consensus_factor(fid, self.var_id(m), link.var_id, self.sigmas.sigma_c, remote=link))
            if self.retained_id(m, peer) in self.graph.factors:
                self.graph.move_message(self.retained_id(m, peer), fid)
            existing[m] = fid
            created.append(fid)
        return created

    def disconnect(self, peer: int) -> None:
        """Drop consensus with `peer`. Each region keeps the link's last
        message as one retained factor per peer, replaced, never stacked."""
        for m, fid in sorted(self.consensus.pop(peer, {}).items()):
            v = self.graph.variables[self.var_id(m)]
            last = v.inbox.get(fid)
            self.graph.remove_factor(fid)
            if last is not None and not last.is_zero():
                self.graph.replace_factor(retained_factor(self.retained_id(m, peer), v.id, last), prime=True)

    def region_mean(self, m: int) -> np.ndarray:
        return self.graph.variables[self.var_id(m)].point()

    def snapshot(self) -> InfoSnapshot:
        means = np.array([self.region_mean(m) for m in range(self.n_m)])
        return InfoSnapshot(centers=self.centers, psi=means[:, PSI], zeta=means[:, ZETA])
