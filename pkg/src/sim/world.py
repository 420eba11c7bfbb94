"""The fleet loop: neighbour discovery, inter-robot factor lifecycle, sensing,
per-layer lockstep GBP rounds and pose integration."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from itertools import combinations
from typing import Optional

import numpy as np

from src.environment.field import SignalField, generate, regions_within, sample
from src.gbp.errors import NonFiniteBelief
from src.gbp.factorgraph import iterate
from src.layers.stack import Layer, RobotStack
from src.sim.mailbox import Mailbox, deliver_incoming, post_outgoing
from src.sim.state import WorldConfig

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 10_000


class NumericalAbort(RuntimeError):
    """A belief went non-finite; carries where it happened."""

    def __init__(self, robot_id: int, layer: str, iteration: int, t: float, detail: str = ""):
        self.robot_id = robot_id
        self.layer = layer
        self.iteration = iteration
        self.t = t
        self.detail = detail
        super().__init__(
            f"numerical abort: robot {robot_id} layer {layer} iteration {iteration} at t={t:.1f}s"
            + (f" ({detail})" if detail else "")
        )

    def __reduce__(self):
        # survives the trip back from a worker process
        return (self.__class__, (self.robot_id, self.layer, self.iteration, self.t, self.detail))


@dataclass(eq=False)
class Robot:
    id: int
    stack: RobotStack
    rng: np.random.Generator
    connected: set[int] = dc_field(default_factory=set)

    @property
    def position(self) -> np.ndarray:
        return self.stack.position

    @property
    def pose(self) -> np.ndarray:
        return self.stack.pose


def corner_positions(n: int, r_r: float) -> np.ndarray:
    """Square-ish block on a 4 r_R grid in the lower-left corner."""
    spacing = 4.0 * r_r
    cols = int(np.ceil(np.sqrt(n)))
    idx = np.arange(n)
    return np.column_stack([(idx % cols + 1) * spacing, (idx // cols + 1) * spacing]).astype(float)


def random_positions(n: int, d: float, r_r: float, min_distance: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform placement, rejecting positions closer than `min_distance` to earlier robots."""
    placed: list[np.ndarray] = []
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        if len(placed) == n:
            break
        candidate = rng.uniform(r_r, d - r_r, size=2)
        if all(np.linalg.norm(candidate - p) >= min_distance for p in placed):
            placed.append(candidate)
    if len(placed) < n:
        raise ValueError(f"could not place {n} robots without overlap in a {d:g} m environment")
    return np.array(placed)


class World:
    def __init__(self, config: WorldConfig, field: SignalField, positions: np.ndarray, seed_seq: np.random.SeedSequence):
        if len(positions) != config.n_r:
            raise ValueError(f"expected {config.n_r} start positions, got {len(positions)}")
        if field.n_m != int(round(config.d / config.r_d)) ** 2:
            raise ValueError("field grid does not match the configured D and r_D")
        self.config = config
        self.field = field
        children = seed_seq.spawn(config.n_r + 1)
        self.rng = np.random.default_rng(children[0])
        self.robots = [
            Robot(i, RobotStack(i, config, field.centers, positions[i]), np.random.default_rng(children[i + 1]))
            for i in range(config.n_r)
        ]
        self.mailbox = Mailbox()
        self.t = 0.0
        self.step_index = 0
        self.failed: set[int] = set()
        self.min_separation = self.pairwise_min_distance()
        self.max_speed = 0.0

    @classmethod
    def create(cls, config: WorldConfig, field: Optional[SignalField] = None) -> "World":
        if field is None:
            field = generate(
                config.seed, config.d, config.r_d, config.octaves, config.frequency,
                config.persistence, psi_star=config.psi_star,
            )
        root = np.random.SeedSequence(config.seed)
        init_seq, world_seq = root.spawn(2)
        if config.init == "corner":
            positions = corner_positions(config.n_r, config.r_r)
        else:
            positions = random_positions(
                config.n_r, config.d, config.r_r, config.safety_distance, np.random.default_rng(init_seq),
            )
        return cls(config, field, positions, world_seq)

    # Algorithm pieces

    def discover_neighbors(self) -> dict[int, set[int]]:
        neighbors: dict[int, set[int]] = {r.id: set() for r in self.robots}
        for a, b in combinations(self.robots, 2):
            if np.linalg.norm(a.position - b.position) < self.config.r_c:
                neighbors[a.id].add(b.id)
                neighbors[b.id].add(a.id)
        return neighbors

    def sync_factors(self, robot: Robot, neighbors: set[int]) -> set[int]:
        for peer in sorted(neighbors - robot.connected):
            robot.stack.connect(peer)
        for peer in sorted(robot.connected - neighbors):
            robot.stack.disconnect(peer)
        robot.connected = set(neighbors)
        return robot.connected

    def inject_comm_failure(self, alpha: Optional[float] = None, rng: Optional[np.random.Generator] = None) -> set[int]:
        alpha = self.config.alpha if alpha is None else alpha
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        rng = self.rng if rng is None else rng
        n = len(self.robots)
        k = int(np.floor(alpha * n + 1e-9))
        if k == 0:
            return set()
        if k == n:
            return set(range(n))
        return {int(i) for i in rng.choice(n, size=k, replace=False)}

    def is_tick(self) -> bool:
        return self.step_index % self.config.cadence_steps == 0

    def run_layer(self, layer: Layer, n: Optional[int] = None) -> None:
        """`n` lockstep rounds across the fleet with a mailbox barrier before each."""
        n = self.config.n_i if n is None else n
        for _ in range(n):
            self.exchange(layer)
            for robot in self.robots:
                graph = robot.stack.graph(layer)
                try:
                    iterate(graph, 1)
                except NonFiniteBelief as e:
                    raise NumericalAbort(robot.id, layer, e.iteration, self.t, e.variable_id) from e

    def exchange(self, layer: Layer) -> None:
        for robot in self.robots:
            post_outgoing(self.mailbox, robot.stack.graph(layer))
        for robot in self.robots:
            deliver_incoming(self.mailbox, robot.id, robot.stack.graph(layer))
        self.mailbox.clear()

    def measure(self, robot: Robot) -> int:
        cfg = self.config
        samples = sample(self.field, robot.position, cfg.r_s, cfg.sigmas.noise, robot.rng)
        robot.stack.info.apply_samples(samples)
        robot.stack.info.activate(regions_within(self.field, robot.position, cfg.r_c))
        return len(samples)

    def step(self) -> "World":
        cfg = self.config
        neighbors = self.discover_neighbors()
        for robot in self.robots:
            self.sync_factors(robot, neighbors[robot.id])

        self.failed = self.inject_comm_failure()
        tick = self.is_tick()
        if tick:
            for robot in self.robots:
                if robot.id not in self.failed:
                    self.measure(robot)
        for robot in self.robots:
            robot.stack.set_comms(self.failed)

        if tick:
            self.run_layer("info")
            for robot in self.robots:
                robot.stack.goal.refresh(robot.stack.info.snapshot(), robot.position, robot.rng)
            self.run_layer("goal")
        self.run_layer("plan")

        for robot in self.robots:
            pose = robot.stack.advance(cfg.dt, cfg.v_max)
            if not np.all(np.isfinite(pose)):
                raise NumericalAbort(robot.id, "plan", robot.stack.planning.graph.iterations, self.t, "non-finite pose")
            self.max_speed = max(self.max_speed, float(np.linalg.norm(pose[2:])))
        self.min_separation = min(self.min_separation, self.pairwise_min_distance())

        # links must reflect the poses the step ends on
        neighbors = self.discover_neighbors()
        for robot in self.robots:
            self.sync_factors(robot, neighbors[robot.id])

        self.step_index += 1
        self.t = self.step_index * cfg.dt
        if logger.isEnabledFor(logging.DEBUG) and tick:
            logger.debug(
                "t=%.1f inter-robot factors=%d failed=%d",
                self.t, sum(r.stack.inter_robot_factor_count() for r in self.robots), len(self.failed),
            )
        return self

    # Read-outs

    def pairwise_min_distance(self) -> float:
        if len(self.robots) < 2:
            return float("inf")
        return min(
            float(np.linalg.norm(a.position - b.position)) for a, b in combinations(self.robots, 2)
        )

    def connectivity_symmetric(self) -> bool:
        return all(
            (b.id in a.connected) == (a.id in b.connected) for a, b in combinations(self.robots, 2)
        )

    def stale_factors(self) -> list[str]:
        """Inter-robot factors whose endpoints are no longer within r_C."""
        stale = []
        by_id = {r.id: r for r in self.robots}
        for robot in self.robots:
            for graph in robot.stack.graphs().values():
                for f in graph.inter_robot_factors():
                    peer = by_id[f.remote.peer]
                    if np.linalg.norm(robot.position - peer.position) >= self.config.r_c:
                        stale.append(f.id)
        return stale

    def diagnostics(self) -> dict[str, int]:
        total = {"singular_marginalization": 0}
        for robot in self.robots:
            for graph in robot.stack.graphs().values():
                total["singular_marginalization"] += graph.diagnostics["singular_marginalization"]
        return total
