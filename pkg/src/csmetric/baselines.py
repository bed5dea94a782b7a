"""Reference estimators: the GAMP posterior mean and CoSaMP."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._linalg import matvec, rmatvec
from .channels import PoissonChannel
from .gamp import ScalarChannelResult
from .model import ProblemInstance


class ChannelUnsupported(ValueError):
    """Raised when a baseline is asked to run on a channel it cannot model."""


def posterior_mean(result: ScalarChannelResult) -> np.ndarray:
    """The GAMP (relaxed BP) estimate: posterior mean on the scalar channel."""
    return result.x_mmse


@dataclass(frozen=True)
class CosampConfig:
    sparsity_k: int
    max_iterations: int = 50
    halting_tolerance: float = 1e-6

    def __post_init__(self):
        if int(self.sparsity_k) != self.sparsity_k or self.sparsity_k < 1:
            raise ValueError("sparsity_k must be a positive integer")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not self.halting_tolerance >= 0:
            raise ValueError("halting_tolerance must be >= 0")

    @classmethod
    def for_prior(cls, p, n, **kwargs):
        """``k = ceil(p * n)`` (at least 1)."""
        return cls(sparsity_k=max(1, math.ceil(p * n)), **kwargs)


@dataclass(frozen=True)
class CosampResult:
    x: np.ndarray
    iterations: int
    residual_norms: tuple
    rank_deficient: bool = False
    support: tuple = field(default=())


def _top(v, k):
    """Indices of the ``k`` largest entries of ``|v|``; ties go to the lower index."""
    k = min(k, v.size)
    order = np.lexsort((np.arange(v.size), -np.abs(v)))
    return np.sort(order[:k])


def _lstsq(a, y):
    """Least squares via QR; falls back to a 1e-12 ridge if ``a`` is rank
    deficient (including more columns than rows)."""
    if a.shape[1] <= a.shape[0]:
        q, r = linalg.qr(a, mode="economic")
        d = np.abs(np.diag(r))
        if d.size and d.min() > d.max() * a.shape[0] * np.finfo(float).eps * 10:
            return linalg.solve_triangular(r, q.T @ y), False
    g = a.T @ a + 1e-12 * np.eye(a.shape[1])
    return linalg.solve(g, a.T @ y, assume_a="pos"), True


def cosamp(y, phi, config: CosampConfig) -> CosampResult:
    """Compressive sampling matching pursuit.

    Each iteration merges the ``2k`` strongest proxy entries with the current
    support, solves least squares there, keeps the ``k`` largest
    coefficients and recomputes the residual. The iteration stops when the
    relative decrease of the residual norm falls below
    ``halting_tolerance``; an iterate that would increase the residual is
    discarded, so the recorded residual norms never go up.
    """
    y = np.asarray(y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    m, n = phi.shape
    if y.shape != (m,):
        raise ValueError(f"shape mismatch: Phi {phi.shape}, y {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    k = config.sparsity_k
    if k > n:
        raise ValueError(f"sparsity_k={k} exceeds N={n}")

    x = np.zeros(n)
    support = np.array([], dtype=int)
    resid = y.copy()
    norms = [float(np.linalg.norm(resid))]
    flagged = False
    it = 0
    if norms[0] == 0.0:
        return CosampResult(x, 0, tuple(norms))
    for it in range(1, config.max_iterations + 1):
        proxy = rmatvec(phi, resid)
        merged = np.union1d(support, _top(proxy, 2 * k))
        coef, deficient = _lstsq(phi[:, merged], y)
        flagged |= deficient
        keep = _top(coef, k)
        new_support = merged[keep]
        new_x = np.zeros(n)
        new_x[new_support] = coef[keep]
        new_resid = y - matvec(phi, new_x)
        nrm = float(np.linalg.norm(new_resid))
        if nrm > norms[-1]:
            it -= 1
            break
        change = (norms[-1] - nrm) / norms[-1]
        x, support, resid = new_x, new_support, new_resid
        norms.append(nrm)
        if nrm == 0.0 or change < config.halting_tolerance:
            break
    return CosampResult(x, it, tuple(norms), flagged, tuple(int(i) for i in support))


def cosamp_instance(instance: ProblemInstance, config: CosampConfig | None = None) -> CosampResult:
    """CoSaMP on an instance; Poisson observations are refused."""
    if isinstance(instance.channel, PoissonChannel):
        raise ChannelUnsupported("CoSaMP assumes additive real noise; Poisson observations are not supported")
    if config is None:
        config = CosampConfig.for_prior(instance.prior.p, instance.n)
    return cosamp(instance.y, instance.phi, config)
