"""Seeded 2-D gradient (Perlin) noise, vectorised over query points."""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6 - 15) + 10)


def _lerp(a: np.ndarray, b: np.ndarray, t: np.ndarray) -> np.ndarray:
    return a + t * (b - a)


def _grad(hash_val: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h = hash_val & 3
    return np.select(
        [h == 0, h == 1, h == 2],
        [x + y, -x + y, x - y],
        default=-x - y,
    )


class PerlinNoise:
    def __init__(self, seed: Union[int, Sequence[int]]):
        rng = np.random.default_rng(seed)
        perm = rng.permutation(256)
        self.permutation = np.concatenate([perm, perm])

    def noise(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x0 = np.floor(x)
        y0 = np.floor(y)
        xi = x0.astype(np.int64) & 255
        yi = y0.astype(np.int64) & 255
        xf = x - x0
        yf = y - y0
        u = _fade(xf)
        v = _fade(yf)

        p = self.permutation
        aa = p[p[xi] + yi]
        ab = p[p[xi] + yi + 1]
        ba = p[p[xi + 1] + yi]
        bb = p[p[xi + 1] + yi + 1]

        x1 = _lerp(_grad(aa, xf, yf), _grad(ba, xf - 1, yf), u)
        x2 = _lerp(_grad(ab, xf, yf - 1), _grad(bb, xf - 1, yf - 1), u)
        return _lerp(x1, x2, v)

    def octave_noise(
        self,
        x: np.ndarray,
        y: np.ndarray,
        octaves: int = 4,
        persistence: float = 0.5,
        frequency: float = 0.02,
    ) -> np.ndarray:
        value = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        amplitude = 1.0
        max_value = 0.0
        # offset keeps the lattice off integer points, where the gradient noise is zero
        for _ in range(octaves):
            value = value + self.noise(x * frequency + 0.5, y * frequency + 0.5) * amplitude
            max_value += amplitude
            amplitude *= persistence
            frequency *= 2
        return value / max_value
