import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csmetric.posterior import posterior, posterior_batch
from csmetric.priors import GaussianSlab, SignalPrior, WeibullSlab, sparse_gaussian, sparse_weibull


def test_point_mass_prior():
    post = posterior(SignalPrior(0.0, GaussianSlab()), 0.8, 0.01)
    assert post.zero_mass == 1.0
    assert post.mean() == pytest.approx(0.0, abs=1e-300)


def test_dense_prior_has_no_atom():
    assert posterior(SignalPrior(1.0, GaussianSlab()), 0.3, 0.01).zero_mass == 0.0
    assert posterior(SignalPrior(1.0, WeibullSlab()), 0.3, 0.01).zero_mass == 0.0


def test_zero_mass_at_zero_observation():
    p, s2, mu = 0.03, 1.0, 0.01
    r = (1 - p) / p * math.sqrt(s2 / mu + 1)
    expected = r / (1 + r)
    assert posterior(sparse_gaussian(p, s2), 0.0, mu).zero_mass == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("prior", [sparse_gaussian(), sparse_gaussian(0.4, 2.0), sparse_weibull(), sparse_weibull(0.2, 2.0, 1.7)])
@pytest.mark.parametrize("q", [-0.4, 0.0, 0.05, 0.7, 3.0])
@pytest.mark.parametrize("mu", [1e-3, 0.1])
def test_normalisation(prior, q, mu):
    post = posterior(prior, q, mu)
    assert abs(post.total_mass() - 1) < 1e-10
    assert np.all(np.diff(post.grid) > 0)
    assert np.all(post.density >= 0)


@pytest.mark.parametrize("prior", [sparse_gaussian(), sparse_weibull()])
def test_mixed_cdf_shape(prior):
    post = posterior(prior, 0.12, 0.01)
    t = np.linspace(post.grid[0] - 1, post.grid[-1] + 1, 2001)
    c = post.cdf(t)
    assert np.all(np.diff(c) >= 0)
    assert abs(post.cdf(post.grid[-1] + 1) - 1) < 1e-10
    jump = post.cdf(0.0) - post.cdf(-1e-12)
    assert jump == pytest.approx(post.zero_mass, abs=1e-9)


def test_batch_matches_single():
    prior = sparse_weibull()
    q = np.array([-0.2, 0.0, 0.3, 1.2])
    batch = posterior_batch(prior, q, 0.02)
    for j, qj in enumerate(q):
        post = posterior(prior, qj, 0.02)
        assert batch.zero_mass[j] == pytest.approx(post.zero_mass, rel=1e-12, abs=1e-300)
        assert batch.mean()[j] == pytest.approx(post.mean(), rel=1e-9, abs=1e-14)


def test_batch_median_solves_cdf():
    for prior in (sparse_gaussian(0.3, 1.0), sparse_weibull(0.3)):
        batch = posterior_batch(prior, np.array([0.9, 0.02, -0.5]), 0.05)
        med = batch.median()
        c = batch.cdf(med)
        below = batch.cdf(np.nextafter(med, -np.inf))
        assert np.all(below <= 0.5 + 1e-10) and np.all(c >= 0.5 - 1e-10)


@pytest.mark.parametrize("bad", [(0.0, 0.0), (np.nan, 0.1), (0.1, -1.0)])
def test_invalid_inputs(bad):
    q, mu = bad
    with pytest.raises(ValueError):
        posterior(sparse_gaussian(), q, mu)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0.01, 0.99), q=st.floats(-3, 3), mu=st.floats(1e-4, 1.0), shape=st.floats(0.4, 3.0))
def test_posterior_mean_within_support_hull(p, q, mu, shape):
    batch = posterior_batch(sparse_weibull(p, 1.0, shape), np.array([q]), mu)
    m = float(batch.mean()[0])
    assert m >= 0.0
    assert float(batch.var()[0]) >= 0.0
    assert 0.0 <= float(batch.zero_mass[0]) <= 1.0


def _weibull_moments_by_quad(p, lam, k, q, mu):
    """Zero mass and posterior mean of a Weibull spike-and-slab via scipy quad in x."""
    from scipy import integrate, stats

    def joint(x):
        return stats.weibull_min.pdf(x, k, scale=lam) * math.exp(-(q - x) ** 2 / (2 * mu))

    sd = math.sqrt(mu)
    edges = sorted({0.0, max(q - 10 * sd, 0.0), max(q, 0.0), max(q + 10 * sd, 0.0), 50.0 * lam})
    z1 = m1 = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            z1 += integrate.quad(joint, a, b, epsabs=0, epsrel=1e-12, limit=400)[0]
            m1 += integrate.quad(lambda x: x * joint(x), a, b, epsabs=0, epsrel=1e-12, limit=400)[0]
    z0 = (1 - p) * math.exp(-q * q / (2 * mu))
    return z0 / (z0 + p * z1), p * m1 / (z0 + p * z1)


@pytest.mark.parametrize("shape", [0.5, 0.7, 1.0, 1.5, 2.0, 2.7])
@pytest.mark.parametrize("q,mu", [(0.05, 1e-3), (0.6, 0.01), (1.5, 0.2), (-0.3, 0.05)])
def test_weibull_any_shape_matches_quad(shape, q, mu):
    prior = sparse_weibull(0.1, 1.2, shape)
    batch = posterior_batch(prior, np.array([q]), mu)
    z, mean = _weibull_moments_by_quad(0.1, 1.2, shape, q, mu)
    assert batch.zero_mass[0] == pytest.approx(z, rel=1e-8, abs=1e-14)
    assert batch.mean()[0] == pytest.approx(mean, rel=1e-8, abs=1e-14)
    assert batch.panels <= 256
