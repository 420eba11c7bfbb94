import numpy as np
import pytest

from src.gbp.errors import GaussianError
from src.gbp.gaussian import (
    CanonicalGaussian,
    from_moments,
    marginalize,
    product,
    product_all,
    quotient,
    to_moments,
)
from tests.conftest import random_spd


def test_from_moments_identity():
    g = from_moments([0.0, 0.0], np.eye(2))
    np.testing.assert_allclose(g.eta, [0.0, 0.0])
    np.testing.assert_allclose(g.lam, np.eye(2))


def test_from_moments_scalar():
    g = from_moments([1.0], [[0.25]])
    np.testing.assert_allclose(g.eta, [4.0])
    np.testing.assert_allclose(g.lam, [[4.0]])


def test_from_moments_two_by_two():
    g = from_moments([1.0, 2.0], [[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(g.lam, np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3, atol=1e-12)
    np.testing.assert_allclose(g.eta, [0.0, 1.0], atol=1e-12)


def test_from_moments_singular_covariance():
    with pytest.raises(GaussianError, match="non-invertible covariance"):
        from_moments([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])


@pytest.mark.parametrize("eta, lam, mu, sigma", [
    ([0.0], [[1.0]], [0.0], [[1.0]]),
    ([4.0], [[4.0]], [1.0], [[0.25]]),
])
def test_to_moments_scalar(eta, lam, mu, sigma):
    m, s = to_moments(CanonicalGaussian(eta, lam))
    np.testing.assert_allclose(m, mu)
    np.testing.assert_allclose(s, sigma)


def test_to_moments_dense():
    m, _ = to_moments(CanonicalGaussian([0.0, 1.0], np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3))
    np.testing.assert_allclose(m, [1.0, 2.0], atol=1e-12)


def test_to_moments_zero_information():
    with pytest.raises(GaussianError, match="belief not yet informative"):
        to_moments(CanonicalGaussian.zeros(3))


def test_construction_symmetrizes():
    g = CanonicalGaussian([0.0, 0.0], [[2.0, 1.0], [0.0, 2.0]])
    np.testing.assert_array_equal(g.lam, g.lam.T)
    np.testing.assert_allclose(g.lam[0, 1], 0.5)


def test_product_adds():
    g = product(CanonicalGaussian([1.0], [[2.0]]), CanonicalGaussian([3.0], [[4.0]]))
    np.testing.assert_allclose(g.eta, [4.0])
    np.testing.assert_allclose(g.lam, [[6.0]])


def test_product_identity_is_exact(rng):
    lam = random_spd(rng, 4)
    g = CanonicalGaussian(rng.normal(size=4), lam)
    out = product(g, CanonicalGaussian.zeros(4))
    np.testing.assert_array_equal(out.eta, g.eta)
    np.testing.assert_allclose(out.lam, g.lam, rtol=0, atol=1e-15)


def test_product_of_three_unit_gaussians():
    parts = [from_moments([m], [[1.0]]) for m in (1.0, 2.0, 3.0)]
    mu, sigma = to_moments(product_all(parts, 1))
    np.testing.assert_allclose(mu, [2.0])
    np.testing.assert_allclose(sigma, [[1 / 3]])


def test_product_commutes_and_associates(rng):
    a, b, c = (CanonicalGaussian(rng.normal(size=3), random_spd(rng, 3)) for _ in range(3))
    np.testing.assert_allclose(product(a, b).lam, product(b, a).lam)
    np.testing.assert_allclose(product(product(a, b), c).eta, product(a, product(b, c)).eta)


def test_product_dimension_mismatch():
    with pytest.raises(GaussianError):
        product(CanonicalGaussian.zeros(1), CanonicalGaussian.zeros(2))


def test_quotient_examples():
    g = CanonicalGaussian([4.0], [[6.0]])
    out = quotient(g, CanonicalGaussian([3.0], [[4.0]]))
    np.testing.assert_allclose(out.eta, [1.0])
    np.testing.assert_allclose(out.lam, [[2.0]])
    same = quotient(g, CanonicalGaussian.zeros(1))
    np.testing.assert_array_equal(same.eta, g.eta)


def test_quotient_undoes_product(rng):
    for _ in range(20):
        g1 = CanonicalGaussian(rng.normal(size=3), random_spd(rng, 3))
        g2 = CanonicalGaussian(rng.normal(size=3), random_spd(rng, 3))
        back = product(quotient(g1, g2), g2)
        np.testing.assert_allclose(back.eta, g1.eta, atol=1e-12)
        np.testing.assert_allclose(back.lam, g1.lam, atol=1e-12)


def test_quotient_may_leave_psd():
    out = quotient(CanonicalGaussian([0.0], [[1.0]]), CanonicalGaussian([0.0], [[2.0]]))
    assert not out.is_psd()


def test_marginalize_block_diagonal():
    g = marginalize(CanonicalGaussian([2.0, 3.0], np.diag([2.0, 3.0])), [0])
    np.testing.assert_allclose(g.lam, [[2.0]])
    np.testing.assert_allclose(g.eta, [2.0])


def test_marginalize_dense():
    g = marginalize(CanonicalGaussian([1.0, 1.0], [[3.0, 1.0], [1.0, 2.0]]), [0])
    np.testing.assert_allclose(g.lam, [[2.5]])
    np.testing.assert_allclose(g.eta, [0.5])
    mu, sigma = to_moments(g)
    np.testing.assert_allclose(mu, [0.2])
    np.testing.assert_allclose(sigma, [[0.4]])


def test_marginalize_all_indices_unchanged():
    g = CanonicalGaussian([1.0, 2.0], [[3.0, 1.0], [1.0, 2.0]])
    assert marginalize(g, [0, 1]) is g


def test_marginalize_singular_block():
    with pytest.raises(GaussianError, match="unconstrained marginalization"):
        marginalize(CanonicalGaussian([1.0, 0.0], [[1.0, 0.0], [0.0, 0.0]]), [0])


@pytest.mark.parametrize("keep", [[], [5], [0, 0]])
def test_marginalize_bad_keep(keep):
    with pytest.raises(GaussianError):
        marginalize(CanonicalGaussian.zeros(3), keep)


def test_marginal_moments_match_joint_blocks(rng):
    for _ in range(50):
        n = int(rng.integers(2, 7))
        g = CanonicalGaussian(rng.normal(size=n), random_spd(rng, n))
        size = int(rng.integers(1, n))
        keep = sorted(rng.choice(n, size=size, replace=False).tolist())
        mu, sigma = to_moments(g)
        m_mu, m_sigma = to_moments(marginalize(g, keep))
        np.testing.assert_allclose(m_mu, mu[keep], atol=1e-9)
        np.testing.assert_allclose(m_sigma, sigma[np.ix_(keep, keep)], atol=1e-9)


def test_moment_round_trip(rng):
    for _ in range(20):
        n = int(rng.integers(1, 5))
        mu = rng.normal(size=n)
        sigma = random_spd(rng, n)
        back_mu, back_sigma = to_moments(from_moments(mu, sigma))
        np.testing.assert_allclose(back_mu, mu, atol=1e-9)
        np.testing.assert_allclose(back_sigma, sigma, atol=1e-9)


def test_arrays_are_read_only():
    g = CanonicalGaussian([1.0], [[1.0]])
    with pytest.raises(ValueError):
        g.eta[0] = 2.0
