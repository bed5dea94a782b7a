import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from csmetric.limits import mmae_limit, mmsue_limit, mmue_scalar, mmwse_limit, roc_point, tau, tau_prime
from csmetric.metrics import Absolute, Squared, Support, WeightedSupport
from csmetric.priors import GaussianSlab, SignalPrior, sparse_gaussian, sparse_weibull

# frozen from an independent nested scipy quadrature (oracles.mmae_by_quad), p=0.03, sigma2=1
MMAE_ORACLE = {1e-3: 0.0008844645203846898, 1e-2: 0.0034057354295788187, 1e-1: 0.01319709268858928}


@pytest.mark.parametrize("mu", sorted(MMAE_ORACLE))
def test_mmae_against_frozen_quadrature(mu):
    assert mmae_limit(sparse_gaussian(), mu, 1) == pytest.approx(MMAE_ORACLE[mu], rel=1e-8)


def test_mmae_oracle_is_reproducible():
    assert oracles.mmae_by_quad(0.03, 1.0, 1e-2) == pytest.approx(MMAE_ORACLE[1e-2], rel=1e-9)


def test_mmae_vanishes_without_noise():
    n = 10000
    assert mmae_limit(sparse_gaussian(), 1e-10, n) < 1e-4 * n * 0.03


def test_mmae_linear_in_n():
    a = mmae_limit(sparse_gaussian(), 0.01, 1)
    assert mmae_limit(sparse_gaussian(), 0.01, 2000) == pytest.approx(2000 * a, rel=1e-12)


@pytest.mark.parametrize("prior", [sparse_gaussian(), sparse_weibull()])
def test_mmae_matches_generic_integrator(prior):
    mu = 0.01
    assert mmue_scalar(prior, mu, Absolute()) == pytest.approx(mmae_limit(prior, mu, 1), rel=1e-6)


def test_mmae_decreases_with_mu():
    vals = [mmae_limit(sparse_gaussian(), mu, 1) for mu in (0.1, 0.03, 0.01, 0.003, 0.001)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_mmue_dense_gaussian_closed_forms():
    s2, mu = 2.0, 0.3
    prior = SignalPrior(1.0, GaussianSlab(s2))
    assert mmue_scalar(prior, mu, Squared()) == pytest.approx(s2 * mu / (s2 + mu), rel=1e-8)
    assert mmue_scalar(prior, mu, Absolute()) == pytest.approx(oracles.scalar_gaussian_mad(s2, mu), rel=1e-8)


@pytest.mark.parametrize("p", [0.03, 0.2])
@pytest.mark.parametrize("mu", [1e-3, 1e-1])
def test_support_limits_match_generic_integrator(p, mu):
    prior = sparse_gaussian(p)
    assert mmue_scalar(prior, mu, Support()) == pytest.approx(mmsue_limit(p, 1.0, mu, 1), rel=1e-6)
    assert mmue_scalar(prior, mu, WeightedSupport(0.3)) == pytest.approx(mmwse_limit(p, 1.0, mu, 1, 0.3), rel=1e-6)


def test_degenerate_threshold():
    n = 9
    assert tau(2 / 3, 3.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert mmsue_limit(2 / 3, 3.0, 1.0, n) == pytest.approx(n / 3, rel=1e-12)


def _mmsue_mp(p, s2, mu, n):
    import mpmath as mp
    mp.mp.dps = 40
    p, s2, mu = mp.mpf(p), mp.mpf(s2), mp.mpf(mu)
    t = 2 * (s2 + mu) / (s2 / mu) * mp.log((1 - p) / p * mp.sqrt(s2 / mu + 1))
    return float(n * ((1 - p) * mp.erfc(mp.sqrt(t / (2 * mu))) + p * mp.erf(mp.sqrt(t / (2 * (s2 + mu))))))


def test_tiny_noise_support_recovery():
    # about one error in ten thousand components, nearly all of them missed detections
    val = mmsue_limit(0.03, 1.0, 1e-6, 10**4)
    assert val == pytest.approx(_mmsue_mp(0.03, 1.0, 1e-6, 10**4), rel=1e-12)
    assert val < 1.2
    rng = np.random.default_rng(3)
    n, mu = 10**6, 1e-6
    x = sparse_gaussian().sample(rng, n)
    q = x + math.sqrt(mu) * rng.standard_normal(n)
    err = ((q * q > tau(0.03, 1.0, mu)) != (x != 0)).astype(float)
    assert abs(err.mean() - val / 10**4) < 3 * err.std(ddof=1) / math.sqrt(n)


def test_beta_endpoints():
    assert mmwse_limit(0.03, 1.0, 0.01, 100, 0.0) == 0.0
    assert mmwse_limit(0.03, 1.0, 0.01, 100, 1.0) == 0.0
    assert roc_point(0.03, 1.0, 0.01, 0.0) == (1.0, 0.0)
    assert roc_point(0.03, 1.0, 0.01, 1.0) == (0.0, 1.0)
    assert tau_prime(0.03, 1.0, 0.01, 0.0) == -math.inf
    assert tau_prime(0.03, 1.0, 0.01, 1.0) == math.inf


def test_nonpositive_threshold_is_always_nonzero():
    p, s2, mu, beta = 0.5, 1.0, 0.1, 0.2
    assert tau_prime(p, s2, mu, beta) <= 0
    assert roc_point(p, s2, mu, beta) == (1.0, 0.0)
    assert mmwse_limit(p, s2, mu, 10, beta) == pytest.approx(10 * beta * (1 - p), rel=1e-15)


@pytest.mark.parametrize("bad", [dict(p=0.0), dict(p=1.0), dict(sigma2=0.0), dict(mu=-1.0)])
def test_invalid_parameters(bad):
    kw = dict(p=0.03, sigma2=1.0, mu=0.01) | bad
    with pytest.raises(ValueError):
        mmsue_limit(kw["p"], kw["sigma2"], kw["mu"], 10)


def test_invalid_beta_and_n():
    with pytest.raises(ValueError):
        mmwse_limit(0.03, 1.0, 0.01, 10, 1.2)
    with pytest.raises(ValueError):
        mmsue_limit(0.03, 1.0, 0.01, 0)


GRID_P = [0.01, 0.03, 0.1, 0.25, 0.5]
GRID_SNR = [0.1, 1.0, 3.0, 10.0, 100.0]


@pytest.mark.parametrize("p", GRID_P)
@pytest.mark.parametrize("snr", GRID_SNR)
def test_half_weight_identities(p, snr):
    mu = 1.0 / snr
    assert tau_prime(p, 1.0, mu, 0.5) == tau(p, 1.0, mu)
    half = mmwse_limit(p, 1.0, mu, 1000, 0.5)
    assert abs(half - mmsue_limit(p, 1.0, mu, 1000) / 2) <= 1e-12 * max(1.0, half)
    fpr, fnr = roc_point(p, 1.0, mu, 0.5)
    assert (1 - p) * fpr + p * fnr == pytest.approx(mmsue_limit(p, 1.0, mu, 1), rel=1e-14, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(p=st.floats(0.001, 0.999), s2=st.floats(0.01, 100), mu=st.floats(1e-6, 10),
       b1=st.floats(0, 1), b2=st.floats(0, 1), n=st.integers(1, 10**5))
def test_roc_monotone_and_limits_nonnegative(p, s2, mu, b1, b2, n):
    lo, hi = sorted((b1, b2))
    f_lo, n_lo = roc_point(p, s2, mu, lo)
    f_hi, n_hi = roc_point(p, s2, mu, hi)
    assert f_hi <= f_lo and n_hi >= n_lo
    for v in (f_lo, n_lo, f_hi, n_hi):
        assert 0.0 <= v <= 1.0
    assert mmwse_limit(p, s2, mu, n, lo) >= 0
    assert mmsue_limit(p, s2, mu, n) >= 0
    assert mmsue_limit(p, s2, mu, n) == pytest.approx(n * mmsue_limit(p, s2, mu, 1), rel=1e-12)


def test_roc_curves_dominate_with_less_noise():
    betas = np.linspace(0.01, 0.99, 25)
    curves = []
    for mu in (0.02, 0.01, 0.005):
        pts = [roc_point(0.03, 1.0, mu, b) for b in betas]
        curves.append([1 - fn for _, fn in pts])
        fprs = [fp for fp, _ in pts]
        assert all(a >= b for a, b in zip(fprs, fprs[1:]))
    # at every fpr of the noisier curve, the cleaner curve's tpr is higher
    for noisy, clean, mu_n, mu_c in ((curves[0], curves[1], 0.02, 0.01), (curves[1], curves[2], 0.01, 0.005)):
        for b in betas:
            fp, fn = roc_point(0.03, 1.0, mu_n, b)
            # clean curve at the same fpr: invert its threshold
            t = 2 * mu_c * _erfcinv(fp) ** 2
            tpr_clean = 1 - math.erf(math.sqrt(t / (2 * (1.0 + mu_c))))
            assert tpr_clean >= 1 - fn


def _erfcinv(v):
    from scipy import special
    return float(special.erfcinv(v))
