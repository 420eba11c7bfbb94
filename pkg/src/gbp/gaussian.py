"""Canonical (information) form Gaussians.

A belief or message is stored as eta = Lambda @ mu and Lambda = Sigma^-1.
Products and quotients are sums and differences in this form, which is
what makes message passing cheap.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgError, LinAlgWarning

from src.gbp.errors import GaussianError

SYMMETRY_TOL = 1e-9
PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CanonicalGaussian:
    eta: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float).reshape(-1)
        lam = np.array(self.lam, dtype=float).reshape(eta.size, eta.size)
        # symmetrize on every construction to stop drift over many rounds
        lam = (lam + lam.T) / 2.0
        eta.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "lam", lam)

    @property
    def dim(self) -> int:
        return self.eta.size

    @classmethod
    def zeros(cls, dim: int) -> "CanonicalGaussian":
        """Zero-information Gaussian, the identity of `product`."""
        if dim <= 0:
            raise GaussianError(f"dimension must be positive, got {dim}")
        return cls(np.zeros(dim), np.zeros((dim, dim)))

    def is_zero(self) -> bool:
        return not (self.eta.any() or self.lam.any())

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.lam) >= -tol))

    def is_informative(self) -> bool:
        """True when the precision is positive definite (moments exist)."""
        if not self.lam.any():
            return False
        try:
            scipy.linalg.cho_factor(self.lam, check_finite=False)
        except LinAlgError:
            return False
        return True

    def mean(self) -> np.ndarray:
        return to_moments(self)[0]

    def try_mean(self) -> Optional[np.ndarray]:
        """Mean from a single Cholesky solve, or None when not informative."""
        if not self.lam.any():
            return None
        try:
            factor = scipy.linalg.cho_factor(self.lam, check_finite=False)
        except LinAlgError:
            return None
        return scipy.linalg.cho_solve(factor, self.eta, check_finite=False)

    def scaled(self, alpha: float) -> "CanonicalGaussian":
        return CanonicalGaussian(alpha * self.eta, alpha * self.lam)

    def __repr__(self) -> str:
        return f"CanonicalGaussian(dim={self.dim}, eta={self.eta.tolist()}, lam={self.lam.tolist()})"


def _check_dims(a: CanonicalGaussian, b: CanonicalGaussian) -> None:
    if a.dim != b.dim:
        raise GaussianError(f"dimension mismatch: {a.dim} vs {b.dim}")


def from_moments(mu: Sequence[float], sigma: np.ndarray) -> CanonicalGaussian:
    mu = np.asarray(mu, dtype=float).reshape(-1)
    sigma = np.asarray(sigma, dtype=float).reshape(mu.size, mu.size)
    try:
        factor = scipy.linalg.cho_factor(sigma, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise GaussianError("non-invertible covariance") from e
    lam = scipy.linalg.cho_solve(factor, np.eye(mu.size))
    return CanonicalGaussian(lam @ mu, lam)


def to_moments(g: CanonicalGaussian) -> tuple[np.ndarray, np.ndarray]:
    if not g.lam.any():
        raise GaussianError("belief not yet informative")
    try:
        factor = scipy.linalg.cho_factor(g.lam, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise GaussianError("belief not yet informative") from e
    sigma = scipy.linalg.cho_solve(factor, np.eye(g.dim))
    sigma = (sigma + sigma.T) / 2.0
    return sigma @ g.eta, sigma


def product(a: CanonicalGaussian, b: CanonicalGaussian) -> CanonicalGaussian:
    _check_dims(a, b)
    return CanonicalGaussian(a.eta + b.eta, a.lam + b.lam)


def product_all(gaussians: Sequence[CanonicalGaussian], dim: int) -> CanonicalGaussian:
    eta = np.zeros(dim)
    lam = np.zeros((dim, dim))
    for g in gaussians:
        if g.dim != dim:
            raise GaussianError(f"dimension mismatch: {g.dim} vs {dim}")
        eta = eta + g.eta
        lam = lam + g.lam
    return CanonicalGaussian(eta, lam)


def quotient(a: CanonicalGaussian, b: CanonicalGaussian) -> CanonicalGaussian:
    """Divide b out of a. The result may be non-PSD; callers check at read-out."""
    _check_dims(a, b)
    return CanonicalGaussian(a.eta - b.eta, a.lam - b.lam)


def marginalize(g: CanonicalGaussian, keep: Sequence[int]) -> CanonicalGaussian:
    """Schur-complement marginal over the indices in `keep` (in the given order)."""
    keep = list(keep)
    if not keep:
        raise GaussianError("keep must be nonempty")
    if len(set(keep)) != len(keep) or min(keep) < 0 or max(keep) >= g.dim:
        raise GaussianError(f"invalid keep indices {keep} for dim {g.dim}")
    kept = set(keep)
    rest = [i for i in range(g.dim) if i not in kept]
    if not rest:
        if keep == list(range(g.dim)):
            return g
        return CanonicalGaussian(g.eta[keep], g.lam[np.ix_(keep, keep)])

    lam_aa = g.lam[np.ix_(keep, keep)]
    lam_ab = g.lam[np.ix_(keep, rest)]
    lam_bb = g.lam[np.ix_(rest, rest)]
    eta_a = g.eta[keep]
    eta_b = g.eta[rest]

    rhs = np.column_stack([lam_ab.T, eta_b])
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            sol = scipy.linalg.solve(lam_bb, rhs, assume_a="sym", check_finite=True)
        except (LinAlgError, LinAlgWarning, ValueError) as e:
            raise GaussianError("unconstrained marginalization") from e

    lam_marg = lam_aa - lam_ab @ sol[:, :-1]
    eta_marg = eta_a - lam_ab @ sol[:, -1]
    return CanonicalGaussian(eta_marg, lam_marg)
