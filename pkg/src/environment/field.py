"""Ground-truth signal field over a square grid of sampling regions."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from src.environment.perlin import PerlinNoise

logger = logging.getLogger(__name__)

MAX_SOURCE_ATTEMPTS = 64


class FieldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SignalField:
    d: float
    r_d: float
    seed: int
    truth: np.ndarray
    centers: np.ndarray
    attempt: int = 0

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=float).reshape(-1)
        centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        if truth.size != centers.shape[0]:
            raise FieldError("truth and centers disagree on region count")
        truth.setflags(write=False)
        centers.setflags(write=False)
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "centers", centers)

    @property
    def side(self) -> int:
        return int(round(self.d / self.r_d))

    @property
    def n_m(self) -> int:
        return self.truth.size

    def check_region(self, m: int) -> None:
        if not 0 <= m < self.n_m:
            raise FieldError(f"region {m} outside environment ({self.n_m} regions)")

    def contains(self, pos: np.ndarray) -> bool:
        pos = np.asarray(pos, dtype=float)
        return bool(np.all(pos >= 0.0) and np.all(pos <= self.d))


@dataclass(frozen=True)
class Sample:
    region: int
    psi_noisy: float
    position: np.ndarray


def grid_side(d: float, r_d: float) -> int:
    if d <= 0 or r_d <= 0:
        raise FieldError(f"D and r_D must be positive, got D={d}, r_D={r_d}")
    ratio = d / r_d
    side = int(round(ratio))
    if side < 1 or abs(ratio - side) > 1e-9:
        raise FieldError(f"D={d} is not divisible by r_D={r_d}")
    return side


def region_centers(d: float, r_d: float) -> np.ndarray:
    """Row-major centres: region m sits at column m % side, row m // side."""
    side = grid_side(d, r_d)
    offsets = (np.arange(side) + 0.5) * r_d
    xs, ys = np.meshgrid(offsets, offsets)
    return np.column_stack([xs.ravel(), ys.ravel()])


def generate(
    seed: int,
    d: float = 100.0,
    r_d: float = 10.0,
    octaves: int = 4,
    frequency: Optional[float] = None,
    persistence: float = 0.5,
    psi_star: Optional[float] = None,
) -> SignalField:
    """Perlin field sampled at region centres, rescaled to span [0, 1].

    With `psi_star`, retries with the next sub-seed until some region lies
    below it.
    """
    centers = region_centers(d, r_d)
    freq = 2.0 / d if frequency is None else frequency

    for attempt in range(MAX_SOURCE_ATTEMPTS):
        noise = PerlinNoise((seed, attempt))
        raw = noise.octave_noise(centers[:, 0], centers[:, 1], octaves, persistence, freq)
        lo, hi = raw.min(), raw.max()
        truth = np.zeros_like(raw) if hi == lo else (raw - lo) / (hi - lo)
        if psi_star is None or truth.min() < psi_star:
            if attempt:
                logger.info("seed %d needed %d retries to contain a source", seed, attempt)
            return SignalField(d=d, r_d=r_d, seed=seed, truth=truth, centers=centers, attempt=attempt)

    raise FieldError(f"no region below {psi_star} after {MAX_SOURCE_ATTEMPTS} attempts (seed {seed})")


def uniform(d: float, r_d: float, value: float, seed: int = 0) -> SignalField:
    centers = region_centers(d, r_d)
    return SignalField(d=d, r_d=r_d, seed=seed, truth=np.full(len(centers), float(value)), centers=centers)


def regions_within(field: SignalField, pos: np.ndarray, radius: float) -> list[int]:
    if radius < 0:
        raise FieldError(f"radius must be non-negative, got {radius}")
    dist = np.linalg.norm(field.centers - np.asarray(pos, dtype=float), axis=1)
    return np.nonzero(dist <= radius)[0].tolist()


def sample(
    field: SignalField,
    pos: np.ndarray,
    r_s: float,
    sigma_psi: float,
    rng: np.random.Generator,
) -> list[Sample]:
    regions = regions_within(field, pos, r_s)
    if not regions:
        return []
    noise = rng.normal(0.0, sigma_psi, size=len(regions)) if sigma_psi > 0 else np.zeros(len(regions))
    return [
        Sample(region=m, psi_noisy=float(field.truth[m] + e), position=field.centers[m].copy())
        for m, e in zip(regions, noise)
    ]


# Text grid fixtures

def export_field(field: SignalField, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.truth.reshape(field.side, field.side)
    lines = [f"D={field.d:g} r_D={field.r_d:g} seed={field.seed} attempt={field.attempt}"]
    lines += [" ".join(f"{v:.6f}" for v in row) for row in grid]
    path.write_text("\n".join(lines) + "\n")
    return path


def import_field(path: Path) -> SignalField:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise FieldError(f"{path}: empty field file")
    try:
        header = dict(tok.split("=", 1) for tok in text[0].split())
        d, r_d, seed = float(header["D"]), float(header["r_D"]), int(header["seed"])
        attempt = int(header.get("attempt", 0))
    except (KeyError, ValueError) as e:
        raise FieldError(f"{path}: bad header '{text[0]}'") from e
    side = grid_side(d, r_d)
    rows = [[float(v) for v in line.split()] for line in text[1:]]
    if len(rows) != side or any(len(r) != side for r in rows):
        raise FieldError(f"{path}: expected a {side}x{side} grid")
    truth = np.asarray(rows).ravel()
    if np.any(truth < 0.0) or np.any(truth > 1.0):
        raise FieldError(f"{path}: values must lie in [0, 1]")
    return SignalField(d=d, r_d=r_d, seed=seed, truth=truth, centers=region_centers(d, r_d), attempt=attempt)
