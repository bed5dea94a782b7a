"""I.i.d. spike-and-slab signal priors.

A prior is a point mass at zero with weight ``1 - p`` plus a continuous slab
with weight ``p``. Slabs expose an integration map ``x = to_x(u)`` together
with the log of ``f(x(u)) * dx/du`` so posterior integrals can be carried out
in a variable where the integrand is smooth (the Weibull density is singular
or has a kink at the origin for most shapes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

# Tail mass ignored when bounding a slab's practical support.
_TAIL = 1e-17


def _check_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class GaussianSlab:
    """Zero-mean Gaussian slab with the given variance."""

    variance: float = 1.0

    def __post_init__(self):
        _check_positive("variance", self.variance)

    @property
    def mean(self):
        return 0.0

    @property
    def var(self):
        return float(self.variance)

    @property
    def support(self):
        return (-math.inf, math.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * np.log(2 * np.pi * self.variance) - 0.5 * x * x / self.variance

    def sample(self, rng, size):
        return rng.standard_normal(size) * math.sqrt(self.variance)

    def bounds(self):
        z = math.sqrt(2.0) * special.erfcinv(_TAIL)
        s = math.sqrt(self.variance)
        return (-z * s, z * s)

    # identity integration map
    def to_u(self, x):
        return np.asarray(x, dtype=float)

    def to_x(self, u):
        return np.asarray(u, dtype=float)

    def log_weight(self, u):
        return self.logpdf(u)

    def describe(self):
        return f"gaussian(variance={self.variance!r})"


@dataclass(frozen=True)
class WeibullSlab:
    """Weibull slab ``f(x) = k/lam (x/lam)^(k-1) exp(-(x/lam)^k)`` on x >= 0."""

    scale: float = 1.0
    shape: float = 0.5

    def __post_init__(self):
        _check_positive("scale", self.scale)
        _check_positive("shape", self.shape)

    @property
    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    @property
    def var(self):
        k = self.shape
        return self.scale**2 * (math.gamma(1.0 + 2.0 / k) - math.gamma(1.0 + 1.0 / k) ** 2)

    @property
    def support(self):
        return (0.0, math.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        k, lam = self.shape, self.scale
        z = np.where(x > 0, x / lam, 1.0)
        out = np.log(k / lam) + (k - 1.0) * np.log(z) - z**k
        # density at the origin: infinite for k < 1, k/lam for k == 1, zero above
        at_zero = math.inf if k < 1 else (math.log(k / lam) if k == 1 else -math.inf)
        return np.where(x > 0, out, np.where(x == 0, at_zero, -math.inf))

    def sample(self, rng, size):
        return self.scale * rng.weibull(self.shape, size)

    def bounds(self):
        return (0.0, self.scale * (-math.log(_TAIL)) ** (1.0 / self.shape))

    # Integration variable u with x = lam * u^n for an integer n, so x(u) is
    # smooth and f(x) dx = k n u^(n k - 1) exp(-u^(n k)) du. When 1/k is an
    # integer, n = 1/k gives the plain exp(-u) weight; otherwise n >= 3/k
    # keeps the weight's power at the origin at least 2.
    @property
    def _n(self):
        inv = 1.0 / self.shape
        if abs(inv - round(inv)) < 1e-12 and round(inv) >= 1:
            return int(round(inv))
        return math.ceil(3.0 / self.shape)

    def to_u(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return (x / self.scale) ** (1.0 / self._n)

    def to_x(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        n = self._n
        return self.scale * (u**n if n > 1 else u)

    def log_weight(self, u):
        u = np.asarray(u, dtype=float)
        nk = self._n * self.shape
        if abs(nk - 1.0) < 1e-12:
            return -u
        with np.errstate(divide="ignore"):
            return math.log(nk) + (nk - 1.0) * np.log(u) - u**nk

    def describe(self):
        return f"weibull(scale={self.scale!r}, shape={self.shape!r})"


Slab = Union[GaussianSlab, WeibullSlab]


@dataclass(frozen=True)
class SignalPrior:
    """Spike-and-slab prior: zero w.p. ``1 - p``, slab draw w.p. ``p``."""

    p: float
    slab: Slab = GaussianSlab()

    def __post_init__(self):
        if not (np.isfinite(self.p) and 0.0 <= self.p <= 1.0):
            raise ValueError(f"sparsity p must lie in [0, 1], got {self.p!r}")
        if not isinstance(self.slab, (GaussianSlab, WeibullSlab)):
            raise TypeError(f"unsupported slab {self.slab!r}")

    @property
    def mean(self):
        return self.p * self.slab.mean

    @property
    def var(self):
        second = self.slab.var + self.slab.mean**2
        return self.p * second - self.mean**2

    @property
    def is_gaussian(self):
        return isinstance(self.slab, GaussianSlab)

    def sample(self, rng, size):
        active = rng.random(size) < self.p
        values = self.slab.sample(rng, size)
        return np.where(active, values, 0.0)

    def describe(self):
        return f"p={self.p!r};slab={self.slab.describe()}"


def sparse_gaussian(p=0.03, variance=1.0):
    return SignalPrior(p, GaussianSlab(variance))


def sparse_weibull(p=0.03, scale=1.0, shape=0.5):
    return SignalPrior(p, WeibullSlab(scale, shape))
