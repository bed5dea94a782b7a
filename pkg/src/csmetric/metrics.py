"""Additive error metrics ``D(xhat, x) = sum_j d(xhat_j, x_j)``."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np


class ErrorMetric:
    """Base class. Subclasses implement a vectorised :meth:`distance`."""

    name = "metric"
    #: metrics that only look at the zero pattern of the estimate
    binary = False

    def distance(self, xhat, x):
        raise NotImplementedError

    def checked_distance(self, xhat, x):
        d = np.asarray(self.distance(xhat, x), dtype=float)
        if d.size == 0:
            return d
        lo, hi = d.min(), d.max()
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError(f"metric {self.name} returned non-finite values")
        if lo < 0:
            raise ValueError(f"metric {self.name} returned negative values")
        return d

    def __repr__(self):
        return self.name


@dataclass(frozen=True, repr=False)
class Power(ErrorMetric):
    """``|xhat - x| ** exponent``."""

    exponent: float

    def __post_init__(self):
        if not (np.isfinite(self.exponent) and self.exponent > 0):
            raise ValueError(f"exponent must be finite and > 0, got {self.exponent!r}")

    @property
    def name(self):
        return f"power({self.exponent!r})"

    def distance(self, xhat, x):
        diff = np.abs(np.subtract(xhat, x))
        if self.exponent == 2:
            return diff * diff
        if self.exponent == 1:
            return diff
        if self.exponent == 0.5:
            return np.sqrt(diff)
        if self.exponent == 1.5:
            return diff * np.sqrt(diff)
        return diff**self.exponent


class Squared(Power):
    def __init__(self):
        super().__init__(2.0)

    name = "squared"


class Absolute(Power):
    def __init__(self):
        super().__init__(1.0)

    name = "absolute"


@dataclass(frozen=True, repr=False)
class Support(ErrorMetric):
    """1 when exactly one of ``xhat``, ``x`` is zero."""

    name = "support"
    binary = True

    def distance(self, xhat, x):
        return (np.not_equal(xhat, 0) != np.not_equal(x, 0)).astype(float)


@dataclass(frozen=True, repr=False)
class WeightedSupport(ErrorMetric):
    """``beta`` per false positive, ``1 - beta`` per false negative."""

    beta: float
    binary = True

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError(f"beta must lie in [0, 1], got {self.beta!r}")

    @property
    def name(self):
        return f"wsupport({self.beta!r})"

    def distance(self, xhat, x):
        on = np.not_equal(xhat, 0)
        nz = np.not_equal(x, 0)
        return self.beta * (on & ~nz) + (1.0 - self.beta) * (~on & nz)


@dataclass(frozen=True, repr=False)
class Custom(ErrorMetric):
    """User-supplied pointwise distance. It must be nonnegative and finite;
    ``d(x, x) = 0`` is not checked. Non-vectorised callables are wrapped
    with :func:`numpy.vectorize`."""

    func: Callable
    label: str = "custom"

    @property
    def name(self):
        return self.label

    def distance(self, xhat, x):
        xhat, x = np.broadcast_arrays(np.asarray(xhat, dtype=float), np.asarray(x, dtype=float))
        try:
            out = np.asarray(self.func(xhat, x), dtype=float)
            if out.shape == xhat.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.vectorize(self.func, otypes=[float])(xhat, x)


_ALIASES = {
    "squared": Squared,
    "mse": Squared,
    "absolute": Absolute,
    "mae": Absolute,
    "support": Support,
}
_PARAM = re.compile(r"^(power|error|wsupport)\s*[(:]?\s*([-+0-9.eE]+)\s*\)?$")


def parse_metric(text: str) -> ErrorMetric:
    """Metric from a short name: ``squared``, ``absolute``, ``support``,
    ``power(0.5)`` / ``error0.5`` / ``power:0.5``, ``wsupport(0.3)``."""
    key = text.strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]()
    m = _PARAM.match(key)
    if not m:
        raise ValueError(f"unknown metric {text!r}")
    kind, val = m.group(1), float(m.group(2))
    if kind == "wsupport":
        return WeightedSupport(val)
    if val == 2:
        return Squared()
    if val == 1:
        return Absolute()
    return Power(val)


def evaluate_error(metric: ErrorMetric, xhat, x) -> float:
    """Total distortion, summed in index order with exact rounding."""
    xhat = np.asarray(xhat, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if xhat.shape != x.shape:
        raise ValueError(f"length mismatch: {xhat.size} vs {x.size}")
    return math.fsum(metric.checked_distance(xhat, x).tolist())
