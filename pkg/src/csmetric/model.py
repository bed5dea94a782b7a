"""Synthetic linear-mixing problems ``y ~ f(y | w)``, ``w = Phi x``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import matvec
from .channels import AWGNChannel, OutputChannel, PoissonChannel
from .priors import SignalPrior


def make_rng(seed):
    """PCG64 generator from an int, a ``SeedSequence`` or a generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.PCG64(seed))


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None or isinstance(seed, np.random.Generator):
        raise ValueError("an explicit integer seed or SeedSequence is required")
    return np.random.SeedSequence(seed)


def sample_signal(prior: SignalPrior, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. components from ``prior``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return prior.sample(make_rng(seed), int(n))


def generate_matrix(m: int, n: int, seed) -> np.ndarray:
    """Bernoulli(0.5) matrix over {0, 1} with every row scaled to unit norm.

    All-zero rows are redrawn, so the unit-norm property holds for every row.
    """
    if int(m) != m or int(n) != n or m < 1 or n < 1:
        raise ValueError(f"invalid dimensions ({m!r}, {n!r})")
    m, n = int(m), int(n)
    rng = make_rng(seed)
    phi = (rng.random((m, n)) < 0.5).astype(float)
    counts = phi.sum(axis=1)
    while np.any(counts == 0):
        empty = np.flatnonzero(counts == 0)
        phi[empty] = (rng.random((empty.size, n)) < 0.5).astype(float)
        counts = phi.sum(axis=1)
    return phi / np.sqrt(counts)[:, None]


def measure(phi, x) -> np.ndarray:
    """``w = Phi x`` with a reduction order independent of threading."""
    return matvec(phi, x)


def channel_sample(channel: OutputChannel, w, seed) -> np.ndarray:
    return channel.sample(np.asarray(w, dtype=float), make_rng(seed))


def channel_log_likelihood(channel: OutputChannel, y_i, w_i):
    """Log density (AWGN) or log pmf (Poisson) of ``y_i`` given ``w_i``."""
    channel.validate(np.atleast_1d(y_i), np.atleast_1d(w_i))
    out = channel.loglik(y_i, w_i)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ProblemInstance:
    x: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    y: np.ndarray
    channel: OutputChannel
    prior: SignalPrior
    seed: object = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.phi.shape[1]

    @property
    def m(self):
        return self.phi.shape[0]

    @property
    def ratio(self):
        return self.m / self.n


def make_instance(prior: SignalPrior, channel: OutputChannel, n: int, m: int, seed) -> ProblemInstance:
    """Signal, matrix and observations from independent child seeds."""
    ss = _seed_sequence(seed)
    sig_seed, mat_seed, noise_seed = ss.spawn(3)
    x = sample_signal(prior, n, sig_seed)
    phi = generate_matrix(m, n, mat_seed)
    w = measure(phi, x)
    if isinstance(channel, PoissonChannel) and np.any(w < 0):
        raise ValueError("Poisson channel requires Phi x >= 0; use a nonnegative prior")
    y = channel_sample(channel, w, noise_seed)
    seed_repr = int(seed) if isinstance(seed, (int, np.integer)) else (ss.entropy, ss.spawn_key)
    return ProblemInstance(x=x, phi=phi, w=w, y=y, channel=channel, prior=prior, seed=seed_repr)


def snr_db(prior: SignalPrior, channel: AWGNChannel) -> float:
    """Per-measurement SNR for unit-norm rows: ``E[x^2] / noise_var``."""
    second = prior.var + prior.mean**2
    return 10.0 * math.log10(second / channel.noise_var)
