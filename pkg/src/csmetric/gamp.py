"""Scalar-variance sum-product GAMP.

The iteration turns ``y ~ f(y | Phi x)`` into decoupled observations
``q_j = x_j + Normal(0, mu)`` with a single ``mu`` shared by all components.

Matrices with a nonzero entry mean (such as normalised {0, 1} Bernoulli
matrices) make plain GAMP unstable: the rank-one mean component is not
"random" and the Onsager correction no longer cancels the feedback. With
``mean_removal=True`` (the default) the matrix is written as
``Phi = A0 + u 1^T`` with zero-mean rows ``A0``, and the system is augmented
with an extra variable ``x_e = kappa * sum(x)`` tied to ``x`` by a noiseless
constraint row. The extra variable has a flat prior and is not reported.
Every other step is the textbook scalar-variance iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._linalg import matvec, rmatvec
from ._quadrature import composite_rule
from .channels import AWGNChannel, OutputChannel, PoissonChannel
from .model import ProblemInstance
from .posterior import posterior_batch
from .priors import SignalPrior


class GampDivergenceError(RuntimeError):
    """GAMP diverged even with damping; ``trajectory`` holds the mu values."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = list(trajectory)


class QuadratureConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GampConfig:
    max_iterations: int = 20
    damping: float = 1.0
    variance_floor: float = 1e-12
    stop_tolerance: float = 1e-8
    mean_removal: bool = True
    #: damping used for the automatic retry after a detected divergence
    retry_damping: float = 0.5

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        if not (0.0 < self.retry_damping <= 1.0):
            raise ValueError("retry_damping must lie in (0, 1]")
        if not (self.variance_floor > 0):
            raise ValueError("variance_floor must be > 0")
        if not (self.stop_tolerance >= 0):
            raise ValueError("stop_tolerance must be >= 0")


@dataclass(frozen=True)
class ScalarChannelResult:
    q: np.ndarray
    mu: float
    x_mmse: np.ndarray
    x_var: np.ndarray
    iterations_run: int
    mu_trajectory: tuple
    floor_hits: int = 0
    damping: float = 1.0
    meta: dict = field(default_factory=dict)


# -- denoisers --------------------------------------------------------------

def input_denoiser(prior: SignalPrior, r, s):
    """Posterior mean and variance of ``X`` given ``R = X + Normal(0, s)``.

    Works elementwise on arrays; ``s`` is a shared scalar.
    """
    r = np.asarray(r, dtype=float)
    if not (np.isfinite(s) and s > 0):
        raise ValueError(f"s must be finite and > 0, got {s!r}")
    if not np.all(np.isfinite(r)):
        raise ValueError("r must be finite")
    post = posterior_batch(prior, r.ravel(), s)
    mean, var = post.mean(), post.var()
    if r.ndim == 0:
        return float(mean[0]), float(var[0])
    return mean.reshape(r.shape), var.reshape(r.shape)


def _awgn_moments(noise_var, p_hat, tau_p, y):
    g = tau_p / (noise_var + tau_p)
    return p_hat + g * (y - p_hat), noise_var * g


def _gauss_hermite_moments(channel, p_hat, tau_p, y, rtol=1e-9, order=40, max_order=640):
    """Moments of ``W ~ Normal(p_hat, tau_p)`` reweighted by the likelihood,
    by Gauss-Hermite quadrature centred at the posterior mode with the
    Laplace scale; the order doubles until the moments settle."""
    # Newton iterations for the mode
    w = p_hat.copy()
    for _ in range(50):
        d1, d2 = channel.loglik_derivs(y, w)
        g = d1 - (w - p_hat) / tau_p
        h = d2 - 1.0 / tau_p
        step = g / h
        w = w - step
        if np.all(np.abs(step) <= 1e-14 * (1.0 + np.abs(w))):
            break
    _, d2 = channel.loglik_derivs(y, w)
    scale = 1.0 / np.sqrt(1.0 / tau_p - d2)

    def moments(n):
        t, wt = np.polynomial.hermite.hermgauss(n)
        z = w[:, None] + math.sqrt(2.0) * scale[:, None] * t
        logf = channel.loglik(y[:, None], z) - 0.5 * (z - p_hat[:, None]) ** 2 / tau_p + t * t
        logf = logf + np.log(wt)
        lz = special.logsumexp(logf, axis=1)
        pw = np.exp(logf - lz[:, None])
        m = (pw * z).sum(axis=1)
        v = (pw * (z - m[:, None]) ** 2).sum(axis=1)
        return m, v

    m0, v0 = moments(order)
    while True:
        order *= 2
        m1, v1 = moments(order)
        ok = (np.abs(m1 - m0) <= rtol * (np.abs(m1) + scale)) & (np.abs(v1 - v0) <= rtol * v1 + 1e-300)
        if np.all(ok):
            return m1, v1
        if order >= max_order:
            raise QuadratureConvergenceError(
                f"Gauss-Hermite output moments did not settle at order {order}; "
                f"max change {np.max(np.abs(m1 - m0)):.3e}"
            )
        m0, v0 = m1, v1


def _poisson_moments(channel: PoissonChannel, p_hat, tau_p, y, rtol=1e-9, order=16, panels=8, max_panels=1024):
    """Moments on ``w >= 0`` by composite Gauss-Legendre over a window
    around the (closed-form) posterior mode; panels double until stable."""
    alpha = channel.scale
    b = p_hat - alpha * tau_p
    mode = np.where(y > 0, 0.5 * (b + np.sqrt(b * b + 4.0 * y * tau_p)), np.maximum(b, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        curv = 1.0 / tau_p + np.where(y > 0, y / np.maximum(mode, 1e-300) ** 2, 0.0)
    sd = 1.0 / np.sqrt(curv)
    lo = np.maximum(mode - 12.0 * sd, 0.0)
    hi = np.maximum(p_hat + 10.0 * math.sqrt(tau_p), mode + 12.0 * sd)
    hi = np.minimum(hi, mode + 40.0 * sd + 40.0 / alpha)

    def moments(k):
        z, wt = composite_rule(lo, hi, k, order)
        with np.errstate(divide="ignore"):
            logf = channel.loglik(y[:, None], z) - 0.5 * (z - p_hat[:, None]) ** 2 / tau_p + np.log(wt)
        lz = special.logsumexp(logf, axis=1)
        pw = np.exp(logf - lz[:, None])
        m = (pw * z).sum(axis=1)
        v = (pw * (z - m[:, None]) ** 2).sum(axis=1)
        return m, v

    m0, v0 = moments(panels)
    while True:
        panels *= 2
        m1, v1 = moments(panels)
        ok = (np.abs(m1 - m0) <= rtol * (np.abs(m1) + sd)) & (np.abs(v1 - v0) <= rtol * v1 + 1e-300)
        if np.all(ok):
            return m1, v1
        if panels >= max_panels:
            raise QuadratureConvergenceError(
                f"Poisson output moments did not settle with {panels} panels; "
                f"max change {np.max(np.abs(m1 - m0)):.3e}"
            )
        m0, v0 = m1, v1


def output_moments(channel: OutputChannel, p_hat, tau_p, y, method="auto"):
    """Mean and variance of ``W`` given ``y`` when ``W ~ Normal(p_hat, tau_p)``."""
    p_hat = np.atleast_1d(np.asarray(p_hat, dtype=float))
    y = np.broadcast_to(np.asarray(y, dtype=float), p_hat.shape)
    if not (np.isfinite(tau_p) and tau_p > 0):
        raise ValueError(f"tau_p must be finite and > 0, got {tau_p!r}")
    if not (np.all(np.isfinite(p_hat)) and np.all(np.isfinite(y))):
        raise ValueError("p_hat and y must be finite")
    channel.validate(y)
    if isinstance(channel, AWGNChannel):
        if method == "auto":
            return _awgn_moments(channel.noise_var, p_hat, tau_p, y)
        return _gauss_hermite_moments(channel, p_hat, tau_p, y)
    if isinstance(channel, PoissonChannel):
        return _poisson_moments(channel, p_hat, tau_p, y)
    raise TypeError(f"unsupported channel {channel!r}")


def output_denoiser(channel: OutputChannel, p_hat, tau_p, y_i, method="auto"):
    """GAMP output step: ``score = (E[W] - p_hat) / tau_p`` and
    ``curvature = (1 - Var[W] / tau_p) / tau_p``.

    ``method="quadrature"`` forces the numerical path for AWGN as well.
    """
    scalar = np.ndim(p_hat) == 0
    mean, var = output_moments(channel, p_hat, tau_p, y_i, method)
    mean, var = np.broadcast_arrays(np.atleast_1d(mean), np.atleast_1d(var))
    score = (mean - np.atleast_1d(p_hat)) / tau_p
    curv = (1.0 - var / tau_p) / tau_p
    if scalar:
        return float(score[0]), float(curv[0])
    return score, curv


# -- iteration ----------------------------------------------------------------

class _Diverged(Exception):
    def __init__(self, trajectory):
        self.trajectory = trajectory


def _diverging(traj):
    if not np.isfinite(traj[-1]):
        return True
    return len(traj) > 5 and traj[-1] > 10.0 * traj[-6]


def _iterate(phi, y, channel, prior, cfg: GampConfig, damping):
    m, n = phi.shape
    floor = cfg.variance_floor
    hits = 0

    def fl(v):
        nonlocal hits
        if v < floor:
            hits += 1
            return floor
        return v

    if cfg.mean_removal:
        u = phi.mean(axis=1)
        a0 = phi - u[:, None]
        kappa = 1.0 / math.sqrt(n)
        uk = u / kappa
    else:
        a0 = phi
        kappa = 0.0
        uk = np.zeros(m)
    fro = float(np.square(a0).sum())
    uk2 = float(uk @ uk)
    mr = cfg.mean_removal

    x = np.full(n, prior.mean)
    tx = fl(prior.var)
    xe = kappa * math.fsum(x) if mr else 0.0
    txe = kappa * kappa * n * prior.var if mr else 0.0
    s = np.zeros(m)
    se = 0.0
    ts = None
    tse = 0.0
    x_bar, xe_bar = x, xe
    traj = []
    r = tr = None

    for _ in range(cfg.max_iterations):
        # output step
        tp = fl(fro / m * tx + uk2 / m * txe)
        p_hat = matvec(a0, x_bar) + uk * xe_bar - tp * s
        if not np.all(np.isfinite(p_hat)):
            raise _Diverged(traj + [math.inf])
        score, curv = output_denoiser(channel, p_hat, tp, y)
        ts_new = fl(float(np.mean(curv)))
        if mr:
            tpe = fl(kappa * kappa * n * tx + txe)
            pe = kappa * math.fsum(x_bar) - xe_bar - tpe * se
            se_new, tse_new = -pe / tpe, 1.0 / tpe
        if ts is None:
            s, ts = score, ts_new
            if mr:
                se, tse = se_new, tse_new
        else:
            s = damping * score + (1.0 - damping) * s
            ts = damping * ts_new + (1.0 - damping) * ts
            if mr:
                se = damping * se_new + (1.0 - damping) * se
                tse = damping * tse_new + (1.0 - damping) * tse

        # input step
        tr = fl(1.0 / (fro / n * ts + kappa * kappa * tse))
        r = x_bar + tr * (rmatvec(a0, s) + kappa * se)
        if mr:
            tre = fl(1.0 / (uk2 * ts + tse))
            re = xe_bar + tre * (float(uk @ s) - se)
        traj.append(tr)
        if not np.all(np.isfinite(r)) or _diverging(traj):
            raise _Diverged(traj)
        x, v = input_denoiser(prior, r, tr)
        tx = fl(float(np.mean(v)))
        if mr:
            xe, txe = re, tre
        x_bar = damping * x + (1.0 - damping) * x_bar
        if mr:
            xe_bar = damping * xe + (1.0 - damping) * xe_bar
        if len(traj) > 1 and abs(traj[-1] - traj[-2]) <= cfg.stop_tolerance * traj[-2]:
            break
    return r, tr, traj, hits


def run_gamp(instance: ProblemInstance, config: GampConfig | None = None) -> ScalarChannelResult:
    """Run GAMP on ``instance`` and report the equivalent scalar channel.

    ``q`` and ``mu`` are the observation and noise variance of the last
    input step; ``x_mmse``/``x_var`` are the input denoiser applied to them,
    so they are exactly the posterior moments on that channel. A detected
    divergence (``mu`` up more than tenfold over five iterations, or
    non-finite values) triggers one retry with damping; a second failure
    raises :class:`GampDivergenceError`.
    """
    cfg = config or GampConfig()
    return run_gamp_arrays(instance.phi, instance.y, instance.channel, instance.prior, cfg)


def run_gamp_arrays(phi, y, channel, prior, config: GampConfig | None = None) -> ScalarChannelResult:
    cfg = config or GampConfig()
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.ndim != 2 or y.shape != (phi.shape[0],):
        raise ValueError(f"shape mismatch: Phi {phi.shape}, y {y.shape}")
    channel.validate(y)
    dampings = [cfg.damping]
    if cfg.retry_damping < cfg.damping:
        dampings.append(cfg.retry_damping)
    failure = None
    for damping in dampings:
        try:
            q, mu, traj, hits = _iterate(phi, y, channel, prior, cfg, damping)
        except _Diverged as exc:
            failure = exc
            continue
        x_mmse, x_var = input_denoiser(prior, q, mu)
        return ScalarChannelResult(
            q=q,
            mu=float(mu),
            x_mmse=x_mmse,
            x_var=x_var,
            iterations_run=len(traj),
            mu_trajectory=tuple(float(t) for t in traj),
            floor_hits=hits,
            damping=damping,
        )
    raise GampDivergenceError("GAMP diverged (also with damping)", failure.trajectory)


__all__ = [
    "GampConfig",
    "GampDivergenceError",
    "ScalarChannelResult",
    "input_denoiser",
    "output_denoiser",
    "output_moments",
    "run_gamp",
    "run_gamp_arrays",
]
