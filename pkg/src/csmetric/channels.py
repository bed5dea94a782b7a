"""Separable output channels ``f(y_i | w_i)``.

Each channel knows how to sample, evaluate its log-likelihood, and give the
first two derivatives of the log-likelihood in ``w`` (used to locate the mode
of the output-side posterior before quadrature).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special


@dataclass(frozen=True)
class AWGNChannel:
    """``y = w + Normal(0, noise_var)``."""

    noise_var: float

    def __post_init__(self):
        if not (np.isfinite(self.noise_var) and self.noise_var > 0):
            raise ValueError(f"noise_var must be finite and > 0, got {self.noise_var!r}")

    lower = -math.inf

    def sample(self, w, rng):
        w = np.asarray(w, dtype=float)
        return w + math.sqrt(self.noise_var) * rng.standard_normal(w.shape)

    def loglik(self, y, w):
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        return -0.5 * math.log(2 * math.pi * self.noise_var) - 0.5 * (y - w) ** 2 / self.noise_var

    def loglik_derivs(self, y, w):
        d1 = (np.asarray(y, dtype=float) - w) / self.noise_var
        return d1, np.full_like(d1, -1.0 / self.noise_var)

    def validate(self, y, w=None):
        if not np.all(np.isfinite(y)):
            raise ValueError("AWGN observations must be finite")
        if w is not None and not np.all(np.isfinite(w)):
            raise ValueError("AWGN channel input must be finite")

    def describe(self):
        return f"awgn(noise_var={self.noise_var!r})"


@dataclass(frozen=True)
class PoissonChannel:
    """``y ~ Poisson(scale * w)`` for ``w >= 0``."""

    scale: float = 100.0

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be finite and > 0, got {self.scale!r}")

    lower = 0.0

    def sample(self, w, rng):
        w = np.asarray(w, dtype=float)
        if np.any(w < 0):
            raise ValueError("Poisson channel requires nonnegative input w")
        return rng.poisson(self.scale * w).astype(float)

    def loglik(self, y, w):
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        rate = self.scale * w
        with np.errstate(divide="ignore", invalid="ignore"):
            out = special.xlogy(y, rate) - rate - special.gammaln(y + 1.0)
        return np.where(w >= 0, out, -math.inf)

    def loglik_derivs(self, y, w):
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = np.where(y > 0, y / w, 0.0) - self.scale
            d2 = np.where(y > 0, -y / (w * w), 0.0)
        return d1, d2

    def validate(self, y, w=None):
        y = np.asarray(y, dtype=float)
        if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(y != np.floor(y)):
            raise ValueError("Poisson observations must be nonnegative integers")
        if w is not None and (np.any(~np.isfinite(w)) or np.any(np.asarray(w) < 0)):
            raise ValueError("Poisson channel input must be nonnegative")

    def describe(self):
        return f"poisson(scale={self.scale!r})"


OutputChannel = Union[AWGNChannel, PoissonChannel]
