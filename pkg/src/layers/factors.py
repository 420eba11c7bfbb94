"""Factor builders for the three layers of a robot's GBP stack.

Every builder returns a `FactorNode` with an analytic Jacobian. z is zero
for everything except the sensor factor and the fixed-value anchors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.environment.field import Sample
from src.gbp.factorgraph import FactorNode, RemoteLink
from src.gbp.gaussian import CanonicalGaussian

INFO_DIM = 4   # [p_x, p_y, psi, zeta]
GOAL_DIM = 2   # [x, y]
PLAN_DIM = 4   # [x, y, vx, vy]
PSI, ZETA = 2, 3

# ||delta|| is floored at this fraction of the hinge radius inside Jacobians
NEAR_ZERO_GUARD = 1e-6


@dataclass(frozen=True, eq=False)
class InfoSnapshot:
    """Immutable read of Information-layer belief means, taken once per tick."""
    centers: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        for name in ("centers", "psi", "zeta"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


# Generic pieces

def unary_prior(factor_id: str, var_id: str, mean: Sequence[float], sigmas: Sequence[float], kind: str = "prior") -> FactorNode:
    mean = np.asarray(mean, dtype=float)
    dim = mean.size
    precision = np.diag(1.0 / np.asarray(sigmas, dtype=float) ** 2)
    return FactorNode(
        factor_id, [var_id], [dim],
        h=lambda X: X,
        jacobian=lambda X: np.eye(dim),
        z=mean,
        lambda_s=precision,
        linearization_point=mean,
        linear=True,
        kind=kind,
    )


def _hinge(pos_a: slice, pos_b: slice, total: int, radius: float):
    """Scalar hinge 1 - ||a - b|| / radius inside the radius, 0 outside."""
    floor = NEAR_ZERO_GUARD * radius

    def h(X: np.ndarray) -> np.ndarray:
        dist = np.linalg.norm(X[pos_a] - X[pos_b])
        return np.array([1.0 - dist / radius if dist <= radius else 0.0])

    def jacobian(X: np.ndarray) -> np.ndarray:
        J = np.zeros((1, total))
        delta = X[pos_a] - X[pos_b]
        dist = np.linalg.norm(delta)
        if dist == 0.0 or dist > radius:
            return J
        row = -delta / (radius * max(dist, floor))
        J[0, pos_a] = row
        J[0, pos_b] = -row
        return J

    return h, jacobian


# Information layer

def sensor_factor(factor_id: str, var_id: str, measurement: Sample, sigma_p: float, sigma_psi: float, sigma_zeta: float) -> FactorNode:
    z = np.array([measurement.position[0], measurement.position[1], measurement.psi_noisy, 1.0])
    precision = np.diag([sigma_p ** -2, sigma_p ** -2, sigma_psi ** -2, sigma_zeta ** -2])
    return FactorNode(
        factor_id, [var_id], [INFO_DIM],
        h=lambda X: X,
        jacobian=lambda X: np.eye(INFO_DIM),
        z=z,
        lambda_s=precision,
        linearization_point=z,
        linear=True,
        kind="sensor",
    )


def consensus_factor(
    factor_id: str,
    var_a: str,
    var_b: str,
    sigma_c: float,
    dim: int = INFO_DIM,
    remote: Optional[RemoteLink] = None,
    linearization_point: Optional[np.ndarray] = None,
) -> FactorNode:
    eye = np.eye(dim)
    J = np.hstack([eye, -eye])
    return FactorNode(
        factor_id, [var_a, var_b], [dim, dim],
        h=lambda X: X[:dim] - X[dim:],
        jacobian=lambda X: J,
        z=np.zeros(dim),
        lambda_s=eye / sigma_c ** 2,
        linearization_point=linearization_point,
        linear=True,
        kind="consensus",
        remote=remote,
    )


def retained_factor(factor_id: str, var_id: str, message: CanonicalGaussian) -> FactorNode:
    """Unary factor whose whole likelihood is `message`: the last word of a
    consensus link that has been dropped. Contributes no energy."""
    dim = message.dim
    f = FactorNode(
        factor_id, [var_id], [dim],
        h=lambda X: X,
        jacobian=lambda X: np.eye(dim),
        z=np.zeros(dim),
        lambda_s=np.zeros((dim, dim)),
        linear=True,
        kind="retained",
    )
    f.absorb(message)
    return f


# Goal layer

def select_signal_target(snapshot: InfoSnapshot) -> tuple[int, float]:
    """Region with the lowest believed psi (lowest index on ties) and its weight u."""
    m = int(np.argmin(snapshot.psi))
    u = float(np.clip(1.0 - snapshot.psi[m], 0.0, 1.0))
    return m, u


def select_exploration_target(
    snapshot: InfoSnapshot,
    p0: np.ndarray,
    rng: np.random.Generator,
    threshold: float = 0.5,
) -> tuple[int, bool]:
    """Nearest unexplored region to p0; a uniform random region once all are explored.

    Returns the region and whether it was drawn at random.
    """
    unexplored = np.nonzero(snapshot.zeta < threshold)[0]
    if unexplored.size == 0:
        return int(rng.integers(snapshot.psi.size)), True
    dist = np.linalg.norm(snapshot.centers[unexplored] - np.asarray(p0, dtype=float), axis=1)
    return int(unexplored[int(np.argmin(dist))]), False


def attraction_factor(factor_id: str, goal_var: str, target: np.ndarray, u: float, sigma: float, kind: str) -> FactorNode:
    """h = u * (x_G - target) with precision sigma^-2 I."""
    target = np.asarray(target, dtype=float).copy()
    J = u * np.eye(GOAL_DIM)
    return FactorNode(
        factor_id, [goal_var], [GOAL_DIM],
        h=lambda X: u * (X - target),
        jacobian=lambda X: J,
        z=np.zeros(GOAL_DIM),
        lambda_s=np.eye(GOAL_DIM) / sigma ** 2,
        linearization_point=target,
        linear=True,
        kind=kind,
    )


def signal_factor(factor_id: str, goal_var: str, snapshot: InfoSnapshot, sigma_i: float) -> tuple[FactorNode, int]:
    m, u = select_signal_target(snapshot)
    return attraction_factor(factor_id, goal_var, snapshot.centers[m], u, sigma_i, "signal"), m


def exploration_factor(
    factor_id: str,
    goal_var: str,
    snapshot: InfoSnapshot,
    p0: np.ndarray,
    sigma_e: float,
    rng: np.random.Generator,
    threshold: float = 0.5,
    target: Optional[int] = None,
) -> tuple[FactorNode, int, bool]:
    """Exploration pull. Passing `target` skips selection (keeps a random goal)."""
    if target is None:
        m, drawn = select_exploration_target(snapshot, p0, rng, threshold)
    else:
        m, drawn = target, True
    return attraction_factor(factor_id, goal_var, snapshot.centers[m], 1.0, sigma_e, "exploration"), m, drawn


def goal_diversity_factor(
    factor_id: str,
    goal_a: str,
    goal_b: str,
    r_d: float,
    sigma_g: float,
    remote: Optional[RemoteLink] = None,
    linearization_point: Optional[np.ndarray] = None,
) -> FactorNode:
    h, jacobian = _hinge(slice(0, 2), slice(2, 4), 2 * GOAL_DIM, r_d)
    return FactorNode(
        factor_id, [goal_a, goal_b], [GOAL_DIM, GOAL_DIM],
        h=h,
        jacobian=jacobian,
        z=np.zeros(1),
        lambda_s=np.array([[sigma_g ** -2]]),
        linearization_point=linearization_point,
        kind="goal_diversity",
        remote=remote,
    )


# Planning layer

def transition(dt: float) -> np.ndarray:
    """Constant-velocity transition [[I, dt I], [0, I]]."""
    phi = np.eye(PLAN_DIM)
    phi[0, 2] = phi[1, 3] = dt
    return phi


def process_noise(dt: float, sigma_d: float) -> np.ndarray:
    eye = np.eye(2)
    return sigma_d ** 2 * np.block([
        [dt ** 3 / 3 * eye, dt ** 2 / 2 * eye],
        [dt ** 2 / 2 * eye, dt * eye],
    ])


def dynamics_factor(factor_id: str, var_t: str, var_next: str, dt: float, sigma_d: float) -> FactorNode:
    if dt <= 0:
        raise ValueError(f"dynamics factor needs dt > 0, got {dt}")
    phi = transition(dt)
    J = np.hstack([-phi, np.eye(PLAN_DIM)])
    return FactorNode(
        factor_id, [var_t, var_next], [PLAN_DIM, PLAN_DIM],
        h=lambda X: X[PLAN_DIM:] - phi @ X[:PLAN_DIM],
        jacobian=lambda X: J,
        z=np.zeros(PLAN_DIM),
        lambda_s=np.linalg.inv(process_noise(dt, sigma_d)),
        linear=True,
        kind="dynamics",
    )


def interrobot_collision_factor(
    factor_id: str,
    var_a: str,
    var_b: str,
    safety_distance: float,
    sigma_r: float,
    remote: Optional[RemoteLink] = None,
    linearization_point: Optional[np.ndarray] = None,
) -> FactorNode:
    h, jacobian = _hinge(slice(0, 2), slice(PLAN_DIM, PLAN_DIM + 2), 2 * PLAN_DIM, safety_distance)
    return FactorNode(
        factor_id, [var_a, var_b], [PLAN_DIM, PLAN_DIM],
        h=h,
        jacobian=jacobian,
        z=np.zeros(1),
        lambda_s=np.array([[sigma_r ** -2]]),
        linearization_point=linearization_point,
        kind="collision",
        remote=remote,
    )


def horizon_velocity_factor(factor_id: str, var_id: str, velocity: np.ndarray, sigma_h: float) -> FactorNode:
    """Anchors only the velocity components; position stays free."""
    select = np.zeros((2, PLAN_DIM))
    select[0, 2] = select[1, 3] = 1.0
    velocity = np.asarray(velocity, dtype=float).copy()
    return FactorNode(
        factor_id, [var_id], [PLAN_DIM],
        h=lambda X: select @ X,
        jacobian=lambda X: select,
        z=velocity,
        lambda_s=np.eye(2) / sigma_h ** 2,
        linear=True,
        kind="horizon",
    )
