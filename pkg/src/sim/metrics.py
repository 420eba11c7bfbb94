"""Evaluation quantities read from robot beliefs against the ground truth."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from src.environment.field import SignalField
from src.layers.factors import InfoSnapshot
from src.sim.state import MetricsRow

VISITED_THRESHOLD = 0.5
DEFAULT_PSI_STAR = 10 / 255


def _snapshots(fleet: Sequence) -> list[InfoSnapshot]:
    """Accept robots, stacks, information layers or snapshots."""
    out = []
    for item in fleet:
        if isinstance(item, InfoSnapshot):
            out.append(item)
        elif hasattr(item, "snapshot"):
            out.append(item.snapshot())
        elif hasattr(item, "info"):
            out.append(item.info.snapshot())
        else:
            out.append(item.stack.info.snapshot())
    return out


def coverage(fleet: Sequence, field: SignalField, threshold: float = VISITED_THRESHOLD) -> float:
    """Fraction of regions each robot believes visited, averaged over robots."""
    snaps = _snapshots(fleet)
    if not snaps:
        return 0.0
    return float(np.mean([np.count_nonzero(s.zeta > threshold) / field.n_m for s in snaps]))


def rms_psi(fleet: Sequence, field: SignalField) -> float:
    snaps = _snapshots(fleet)
    if not snaps:
        return 0.0
    psi = np.clip(np.array([s.psi for s in snaps]), 0.0, 1.0)
    return float(np.sqrt(np.mean((psi - field.truth[None, :]) ** 2)))


def robots_done(fleet: Sequence, psi_star: float = DEFAULT_PSI_STAR, threshold: float = VISITED_THRESHOLD) -> list[bool]:
    return [
        bool(np.any((s.psi <= psi_star) & (s.zeta > threshold)))
        for s in _snapshots(fleet)
    ]


def source_seek_done(fleet: Sequence, field: SignalField, psi_star: float = DEFAULT_PSI_STAR) -> bool:
    """Every robot credibly knows some region at or below psi_star."""
    if not 0.0 < psi_star < 1.0:
        raise ValueError(f"psi_star must lie in (0, 1), got {psi_star}")
    done = robots_done(fleet, psi_star)
    return bool(done) and all(done)


def measure(t: float, fleet: Sequence, field: SignalField, psi_star: float = DEFAULT_PSI_STAR) -> MetricsRow:
    snaps = _snapshots(fleet)
    done = robots_done(snaps, psi_star)
    return MetricsRow(
        t=t,
        coverage=coverage(snaps, field),
        rms_psi=rms_psi(snaps, field),
        done=done,
        fleet_done=bool(done) and all(done),
    )
