"""Performance limits of the metric-optimal estimators on the scalar channel.

All functions take the channel noise ``mu`` as an input; in experiments it
comes from a GAMP run. Support-type limits assume a Gaussian slab and are
closed forms in ``erf``/``erfc``. The generic limit integrates the minimum
conditional risk against the marginal density of ``q``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from ._quadrature import adaptive_quad
from .metrics import ErrorMetric, Support, WeightedSupport
from .posterior import GaussianPosteriorBatch, posterior_batch
from .priors import GaussianSlab, SignalPrior


def _check(p, sigma2, mu):
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    if not (np.isfinite(sigma2) and sigma2 > 0):
        raise ValueError(f"sigma2 must be finite and > 0, got {sigma2!r}")
    if not (np.isfinite(mu) and mu > 0):
        raise ValueError(f"mu must be finite and > 0, got {mu!r}")


def _check_beta(beta):
    if not (0.0 <= beta <= 1.0):
        raise ValueError(f"beta must lie in [0, 1], got {beta!r}")


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n!r}")
    return int(n)


def tau_prime(p, sigma2, mu, beta):
    """Squared-observation threshold of the weighted support decision.

    ``-inf`` at ``beta = 0`` and ``+inf`` at ``beta = 1``.
    """
    _check(p, sigma2, mu)
    _check_beta(beta)
    if beta == 0.0:
        return -math.inf
    if beta == 1.0:
        return math.inf
    snr = sigma2 / mu
    log_arg = special.logit(beta) + math.log1p(-p) - math.log(p) + 0.5 * math.log1p(snr)
    return 2.0 * ((sigma2 + mu) / snr) * log_arg


def tau(p, sigma2, mu):
    """Threshold of the MAP support decision (``tau_prime`` at ``beta = 1/2``)."""
    return tau_prime(p, sigma2, mu, 0.5)


def roc_point(p, sigma2, mu, beta):
    """``(fpr, fnr)`` of the weighted support decision at weight ``beta``."""
    t = tau_prime(p, sigma2, mu, beta)
    if t <= 0:
        return 1.0, 0.0
    fpr = float(special.erfc(math.sqrt(t / (2.0 * mu))))
    fnr = float(special.erf(math.sqrt(t / (2.0 * (sigma2 + mu)))))
    return fpr, fnr


def mmwse_limit(p, sigma2, mu, N, beta):
    """Minimum expected weighted support error over ``N`` components."""
    N = _check_n(N)
    fpr, fnr = roc_point(p, sigma2, mu, beta)
    return N * beta * (1.0 - p) * fpr + N * (1.0 - beta) * p * fnr


def mmsue_limit(p, sigma2, mu, N):
    """Minimum expected support error over ``N`` components."""
    N = _check_n(N)
    fpr, fnr = roc_point(p, sigma2, mu, 0.5)
    return N * (1.0 - p) * fpr + N * p * fnr


# -- integrals over the channel output -----------------------------------

def _q_breakpoints(prior: SignalPrior, mu, extra=()):
    sd_n = math.sqrt(mu)
    pts = [0.0]
    if isinstance(prior.slab, GaussianSlab):
        sd_q = math.sqrt(prior.slab.variance + mu)
        L = 8.0 * sd_q
        scales = (sd_n, sd_q)
    else:
        b_lo, b_hi = prior.slab.bounds()
        sd_s = math.sqrt(prior.slab.var)
        L = max(abs(b_lo), abs(b_hi)) + 10.0 * sd_n
        scales = (sd_n, sd_s)
        m = prior.slab.mean
        pts += [m, m + sd_s, m + 4 * sd_s, m + 16 * sd_s, min(b_lo, 0.0) - 10.0 * sd_n]
    for s in scales:
        for k in (1.0, 2.0, 4.0, 8.0):
            pts += [k * s, -k * s]
    pts += list(extra)
    pts = np.asarray(pts, dtype=float)
    lo = -L if isinstance(prior.slab, GaussianSlab) else min(prior.slab.bounds()[0], 0.0) - 10.0 * sd_n
    pts = pts[(pts > lo) & (pts < L)]
    return np.concatenate([[lo], pts, [L]])


def _marginal_weight(post):
    """``f_Q(q)`` from the two branches of the posterior normaliser."""
    p = post.prior.p
    with np.errstate(divide="ignore"):
        log0 = math.log1p(-p) - 0.5 * (math.log(2 * math.pi * post.mu) + post.q**2 / post.mu) if p < 1 else -np.inf
        log1 = math.log(p) + post.log_slab_evidence if p > 0 else -np.inf
    return np.exp(np.logaddexp(log0, log1))


def mmue_scalar(prior: SignalPrior, mu, metric: ErrorMetric, rel_tol=1e-8):
    """Per-component minimum expected distortion for ``metric``.

    The conditional risk is minimised by the generic estimator at every
    quadrature node and integrated against the density of ``q``.
    """
    from .estimators import estimate_generic

    if not (np.isfinite(mu) and mu > 0):
        raise ValueError(f"mu must be finite and > 0, got {mu!r}")
    extra = []
    if isinstance(metric, (Support, WeightedSupport)) and isinstance(prior.slab, GaussianSlab) and 0 < prior.p < 1:
        beta = metric.beta if isinstance(metric, WeightedSupport) else 0.5
        t = tau_prime(prior.p, prior.slab.variance, mu, beta)
        if 0 < t < math.inf:
            extra = [math.sqrt(t), -math.sqrt(t)]

    def integrand(q):
        post = posterior_batch(prior, q, mu)
        xhat = estimate_generic(metric, prior, q, mu)
        risk = post.expected_loss(metric, xhat, split=not metric.binary)
        return risk * _marginal_weight(post)

    value, _ = adaptive_quad(integrand, _q_breakpoints(prior, mu, extra), rel_tol=rel_tol, abs_tol=1e-300)
    return value


def _mae_at_median(post):
    """``-E[x; x < m | q] + E[x; x > m | q]`` at the posterior median ``m``."""
    m = post.median()
    s = 1.0 - post.zero_mass
    if isinstance(post, GaussianPosteriorBatch):
        a, sd = post.cont_a, math.sqrt(post._v)
        z = (m - a) / sd
        return s * (a * (1.0 - 2.0 * special.ndtr(z)) + 2.0 * sd * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi))
    x, w = post.split_rule(m)
    return s * (w * x * np.sign(x - m[:, None])).sum(axis=1)


def mmae_limit(prior: SignalPrior, mu, N, rel_tol=1e-8):
    """Minimum expected absolute error over ``N`` components."""
    N = _check_n(N)
    if not (np.isfinite(mu) and mu > 0):
        raise ValueError(f"mu must be finite and > 0, got {mu!r}")

    def integrand(q):
        post = posterior_batch(prior, q, mu)
        return _mae_at_median(post) * _marginal_weight(post)

    value, _ = adaptive_quad(integrand, _q_breakpoints(prior, mu), rel_tol=rel_tol, abs_tol=1e-300)
    return N * value
