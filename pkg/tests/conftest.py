import numpy as np
import pytest

from src.environment.field import SignalField, region_centers
from src.gbp.factorgraph import FactorNode
from src.sim.state import Sigmas, WorldConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    """Two robots in a 40 m box of 16 regions."""
    return WorldConfig(n_r=2, d=40.0, r_d=10.0, r_c=40.0, r_s=5.0, t_max=5.0, seed=3)


def make_field(truth, d=40.0, r_d=10.0) -> SignalField:
    return SignalField(d=d, r_d=r_d, seed=0, truth=np.asarray(truth, dtype=float), centers=region_centers(d, r_d))


def noiseless_sigmas(**kw) -> Sigmas:
    return Sigmas(sensing_noise=0.0, **kw)


def random_spd(rng, n, scale=1.0, floor=0.5):
    A = rng.normal(size=(n, n))
    return scale * (A @ A.T) / n + floor * np.eye(n)


def linear_unary(fid, var, mean, precision, dim=None):
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    dim = mean.size if dim is None else dim
    return FactorNode(
        fid, [var], [dim],
        h=lambda X: X,
        jacobian=lambda X: np.eye(dim),
        z=mean,
        lambda_s=np.atleast_2d(precision),
        linear=True,
        kind="prior",
    )


def linear_pairwise(fid, a, b, J, z, precision, dims):
    J = np.atleast_2d(np.asarray(J, dtype=float))
    return FactorNode(
        fid, [a, b], list(dims),
        h=lambda X: J @ X,
        jacobian=lambda X: J,
        z=np.atleast_1d(z),
        lambda_s=np.atleast_2d(precision),
        linear=True,
    )


def finite_difference_jacobian(h, X, step=1e-6):
    X = np.asarray(X, dtype=float)
    cols = []
    for i in range(X.size):
        e = np.zeros_like(X)
        e[i] = step
        cols.append((np.asarray(h(X + e)) - np.asarray(h(X - e))) / (2 * step))
    return np.column_stack(cols)
