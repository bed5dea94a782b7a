"""Posterior of ``x`` given ``q = x + Normal(0, mu)`` under a spike-and-slab prior.

The law is a point mass at zero plus a continuous part. :class:`PosteriorBatch`
handles a whole vector of observations at once; the continuous part is
integrated with composite Gauss-Legendre rules laid out in the slab's
integration variable over a window where the integrand is not negligible.
For the Gaussian slab the continuous part is itself Gaussian and the closed
forms are used wherever they exist.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from ._quadrature import composite_rule
from .priors import GaussianSlab, SignalPrior

_LOG_2PI = math.log(2 * math.pi)
# half-width of the likelihood window, in noise standard deviations
_WINDOW = 12.0


def norm_logpdf(x, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * x * x / var


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


def _check_inputs(q, mu):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.ndim != 1:
        q = q.ravel()
    if not np.all(np.isfinite(q)):
        raise ValueError("observations q must be finite")
    if not (np.isfinite(mu) and mu > 0):
        raise ValueError(f"noise variance mu must be finite and > 0, got {mu!r}")
    return q, float(mu)


def posterior_batch(prior: SignalPrior, q, mu, **kwargs) -> "PosteriorBatch":
    """Vectorised posterior for every entry of ``q``."""
    if isinstance(prior.slab, GaussianSlab):
        return GaussianPosteriorBatch(prior, q, mu, **kwargs)
    return PosteriorBatch(prior, q, mu, **kwargs)


class PosteriorBatch:
    """Posteriors ``x_j | q_j`` for a vector ``q`` and shared noise ``mu``.

    Attributes
    ----------
    zero_mass : ndarray
        ``Pr(x_j = 0 | q_j)``.
    log_slab_evidence : ndarray
        ``log int f_slab(x) N(q_j - x; 0, mu) dx``.
    """

    order = 16

    def __init__(self, prior: SignalPrior, q, mu, panels=8, rtol=1e-10, max_panels=4096):
        self.prior = prior
        self.slab = prior.slab
        self.q, self.mu = _check_inputs(q, mu)
        self.panels = panels
        self.rtol = rtol
        self.max_panels = max_panels
        self._setup_continuous()
        p = prior.p
        log_b0 = _log(1.0 - p) + norm_logpdf(self.q, self.mu)
        log_b1 = _log(p) + self.log_slab_evidence
        with np.errstate(invalid="ignore"):
            self.zero_mass = special.expit(log_b0 - log_b1)
        if p == 0.0:
            self.zero_mass = np.ones_like(self.q)
        elif p == 1.0:
            self.zero_mass = np.zeros_like(self.q)

    def __len__(self):
        return self.q.shape[0]

    # -- continuous part ------------------------------------------------
    def _window(self):
        q, mu = self.q, self.mu
        sd = math.sqrt(mu)
        s_lo, s_hi = self.slab.support
        b_lo, b_hi = self.slab.bounds()
        lo = q - _WINDOW * sd
        hi = q + _WINDOW * sd
        # below the support the Gaussian factor peaks at the support edge
        below = q < s_lo
        if np.any(below):
            hi = np.where(below, q + np.sqrt((s_lo - q) ** 2 + _WINDOW**2 * mu), hi)
        above = q > s_hi
        if np.any(above):
            lo = np.where(above, q - np.sqrt((q - s_hi) ** 2 + _WINDOW**2 * mu), lo)
        lo = np.maximum(lo, s_lo)
        hi = np.minimum(hi, s_hi)
        # the prior's own tails cap very wide likelihood windows
        hi = np.minimum(hi, np.maximum(b_hi, q + 6.0 * sd))
        lo = np.maximum(lo, np.minimum(b_lo, q - 6.0 * sd))
        return lo, hi

    def _raw_rule(self, u_a, u_b, panels, rows=None):
        """Nodes ``x`` and log of (weight times unnormalised density)."""
        q = self.q if rows is None else self.q[rows]
        u, w = composite_rule(u_a, u_b, panels, self.order)
        x = self.slab.to_x(u)
        with np.errstate(divide="ignore"):
            logk = self.slab.log_weight(u) + norm_logpdf(q[:, None] - x, self.mu) + np.log(w)
        return x, logk

    def _setup_continuous(self):
        x_lo, x_hi = self._window()
        self.x_lo, self.x_hi = x_lo, x_hi
        self.u_lo = self.slab.to_u(x_lo)
        self.u_hi = self.slab.to_u(x_hi)
        panels = self.panels
        prev = self._moments(panels)
        while True:
            cur = self._moments(2 * panels)
            scale = np.abs(cur[1]) + (x_hi - x_lo)
            ok = (np.abs(cur[0] - prev[0]) <= self.rtol * 10) & (np.abs(cur[1] - prev[1]) <= self.rtol * scale)
            panels *= 2
            if np.all(ok) or 2 * panels > self.max_panels:
                break
            prev = cur
        self.panels = panels
        self.log_slab_evidence = cur[0]

    def _moments(self, panels):
        x, logk = self._raw_rule(self.u_lo, self.u_hi, panels)
        log_z = special.logsumexp(logk, axis=1)
        w = np.exp(logk - log_z[:, None])
        return log_z, (w * x).sum(axis=1)

    def rule(self, a=None, b=None, rows=None, panels=None):
        """Nodes ``x`` and normalised weights of the continuous part on
        ``[a, b]`` (defaults to the whole window); weights integrate the
        conditional density given ``x != 0``."""
        u_lo = self.u_lo if rows is None else self.u_lo[rows]
        u_hi = self.u_hi if rows is None else self.u_hi[rows]
        ua = u_lo if a is None else np.clip(self.slab.to_u(a), u_lo, u_hi)
        ub = u_hi if b is None else np.clip(self.slab.to_u(b), u_lo, u_hi)
        if panels is None:
            # keep the panel width of the full window on sub-intervals
            frac = np.max((ub - ua) / np.maximum(u_hi - u_lo, np.finfo(float).tiny), initial=0.0)
            panels = max(2, min(self.panels, math.ceil(frac * self.panels) + 1))
        x, logk = self._raw_rule(ua, ub, panels, rows)
        lz = self.log_slab_evidence if rows is None else self.log_slab_evidence[rows]
        return x, np.exp(logk - lz[:, None])

    @cached_property
    def nodes(self):
        return self.rule()

    @cached_property
    def coarse_nodes(self):
        """Cheaper rule for scanning many candidates."""
        return self.nodes if self.panels <= 8 else self.rule(panels=8)

    def split_rule(self, at, rows=None):
        """Rule split at ``at`` so kinks of a loss at ``at`` fall on a panel edge."""
        x1, w1 = self.rule(b=at, rows=rows)
        x2, w2 = self.rule(a=at, rows=rows)
        return np.concatenate([x1, x2], axis=1), np.concatenate([w1, w2], axis=1)

    @cached_property
    def cont_mean(self):
        x, w = self.nodes
        return (w * x).sum(axis=1)

    @cached_property
    def cont_var(self):
        x, w = self.nodes
        return np.maximum((w * (x - self.cont_mean[:, None]) ** 2).sum(axis=1), 0.0)

    def cont_cdf(self, t):
        """``Pr(x <= t | q, x != 0)``."""
        _, w = self.rule(b=np.broadcast_to(np.asarray(t, dtype=float), self.q.shape))
        return np.clip(w.sum(axis=1), 0.0, 1.0)

    # -- mixed law ------------------------------------------------------
    def mean(self):
        return (1.0 - self.zero_mass) * self.cont_mean

    def var(self):
        s = 1.0 - self.zero_mass
        second = s * (self.cont_var + self.cont_mean**2)
        return np.maximum(second - self.mean() ** 2, 0.0)

    def cdf(self, t):
        t = np.broadcast_to(np.asarray(t, dtype=float), self.q.shape)
        return (1.0 - self.zero_mass) * self.cont_cdf(t) + self.zero_mass * (t >= 0)

    def cont_density(self, t):
        """Density of the continuous part (given ``x != 0``) at ``t``."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            logd = self.slab.logpdf(t) + norm_logpdf(self.q - t, self.mu) - self.log_slab_evidence
        return np.exp(logd)

    def median(self):
        """Median of the mixed law; exactly 0 when the atom straddles 1/2.

        Otherwise the continuous CDF is inverted by safeguarded Newton steps
        (bisection fallback) to ``1e-10`` times the window span.
        """
        if getattr(self, "_median", None) is not None:
            return self._median
        s = 1.0 - self.zero_mass
        z = self.zero_mass
        below0 = s * self.cont_cdf(np.zeros_like(self.q))
        neg = below0 > 0.5
        pos = below0 + z < 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            target = np.where(neg, 0.5 / s, np.where(pos, (0.5 - z) / s, 0.0))
        lo = np.where(neg, np.minimum(self.x_lo, 0.0), 0.0)
        hi = np.where(pos, np.maximum(self.x_hi, 0.0), 0.0)
        tol = 1e-10 * np.maximum(self.x_hi - self.x_lo, np.finfo(float).tiny)

        # start from the quadrature nodes' cumulative weights
        x, w = self.nodes
        idx = np.argmax(np.cumsum(w, axis=1) >= target[:, None], axis=1)
        t = np.clip(x[np.arange(x.shape[0]), idx], lo, hi)
        done = ~(neg | pos)
        for _ in range(400):
            if np.all(done):
                break
            F = self.cont_cdf(t) - target
            lo = np.where(~done & (F < 0), t, lo)
            hi = np.where(~done & (F >= 0), t, hi)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                step = F / self.cont_density(t)
            tiny = np.isfinite(step) & (np.abs(step) <= tol)
            tn = t - step
            newton_ok = tiny | (np.isfinite(tn) & (tn > lo) & (tn < hi))
            tn = np.where(newton_ok, tn, 0.5 * (lo + hi))
            t = np.where(done, t, tn)
            done = done | tiny | (hi - lo <= tol)
        self._median = np.where(neg | pos, t, 0.0)
        return self._median

    # -- expected distortion ---------------------------------------------
    def expected_loss(self, metric, xhat, split=True, rows=None):
        """``E[d(xhat_j, x_j) | q_j]`` for one candidate per row.

        With ``rows`` the i-th candidate belongs to row ``rows[i]``, so several
        candidates per row can be scored in one call (split rule only).
        """
        xhat = np.asarray(xhat, dtype=float)
        if split:
            x, w = self.split_rule(xhat, rows=rows)
        elif rows is None:
            x, w = self.nodes
        else:
            raise ValueError("rows requires the split rule")
        z = self.zero_mass if rows is None else self.zero_mass[rows]
        cont = (w * metric.checked_distance(xhat[:, None], x)).sum(axis=1)
        atom = metric.checked_distance(xhat, np.zeros_like(xhat))
        return z * atom + (1.0 - z) * cont

    def expected_loss_grid(self, metric, candidates, max_block=1 << 22):
        """Expected distortion for a ``(n, c)`` array of candidates, using
        a coarse unsplit rule; values are approximate near kinks of ``d``."""
        candidates = np.asarray(candidates, dtype=float)
        x, w = self.coarse_nodes
        n, c = candidates.shape
        k = x.shape[1]
        rows = max(1, max_block // max(c * k, 1))
        out = np.empty((n, c))
        for s in range(0, n, rows):
            cs = candidates[s:s + rows]
            d = metric.checked_distance(cs[:, :, None], x[s:s + rows, None, :])
            out[s:s + rows] = np.einsum("rck,rk->rc", d, w[s:s + rows])
        atom = metric.checked_distance(candidates, np.zeros_like(candidates))
        z = self.zero_mass[:, None]
        return z * atom + (1.0 - z) * out


class GaussianPosteriorBatch(PosteriorBatch):
    """Closed forms for a zero-mean Gaussian slab: given ``x != 0`` the
    posterior is ``Normal(q s2 / (s2 + mu), s2 mu / (s2 + mu))``."""

    def __init__(self, prior, q, mu, panels=4, **kwargs):
        super().__init__(prior, q, mu, panels=panels, **kwargs)

    def _setup_continuous(self):
        s2 = self.slab.variance
        mu = self.mu
        self.cont_a = self.q * s2 / (s2 + mu)
        self._v = s2 * mu / (s2 + mu)
        sd = math.sqrt(self._v)
        self.x_lo = self.cont_a - 10.0 * sd
        self.x_hi = self.cont_a + 10.0 * sd
        self.u_lo, self.u_hi = self.x_lo, self.x_hi
        self.log_slab_evidence = norm_logpdf(self.q, s2 + mu)

    @property
    def cont_mean(self):
        return self.cont_a

    @property
    def cont_var(self):
        return np.full_like(self.q, self._v)

    def cont_cdf(self, t):
        return special.ndtr((np.asarray(t, dtype=float) - self.cont_a) / math.sqrt(self._v))

    def mean(self):
        return (1.0 - self.zero_mass) * self.cont_a

    def var(self):
        s = 1.0 - self.zero_mass
        return np.maximum(s * (self._v + self.cont_a**2) - self.mean() ** 2, 0.0)

    def median(self):
        s = 1.0 - self.zero_mass
        z = self.zero_mass
        sd = math.sqrt(self._v)
        below0 = s * special.ndtr(-self.cont_a / sd)
        out = np.zeros_like(self.q)
        neg = below0 > 0.5
        pos = below0 + z < 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(neg, self.cont_a + sd * special.ndtri(0.5 / s), out)
            out = np.where(pos, self.cont_a + sd * special.ndtri((0.5 - z) / s), out)
        return out


@dataclass(frozen=True)
class MixedPosterior:
    """Posterior of a single component: an atom at zero plus a tabulated
    continuous density.

    ``masses`` are the quadrature masses of the continuous part at ``grid``,
    so ``zero_mass + masses.sum()`` is the total probability.
    """

    zero_mass: float
    grid: np.ndarray
    density: np.ndarray
    masses: np.ndarray

    def total_mass(self):
        return self.zero_mass + float(self.masses.sum())

    def expect(self, g):
        """``E[g(x) | q]`` under the tabulated law."""
        return self.zero_mass * float(g(np.zeros(1))[0]) + float((self.masses * g(self.grid)).sum())

    def mean(self):
        return float((self.masses * self.grid).sum())

    def cdf(self, t):
        """Mixed CDF: right-continuous, jump of ``zero_mass`` at 0."""
        t = np.asarray(t, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        idx = np.searchsorted(self.grid, t, side="right")
        return cum[idx] + self.zero_mass * (t >= 0)


_GRID_POINTS = 4096


def posterior(prior: SignalPrior, q_j: float, mu: float) -> MixedPosterior:
    """Exact conditional law of ``x_j`` given ``q_j`` on the scalar channel.

    Gaussian slab: the continuous part is tabulated on 4096 equispaced points
    over its mean +/- 8 standard deviations with trapezoid masses. Other
    slabs: the nodes and masses of the adaptive Gauss-Legendre rule.
    """
    if not np.isfinite(q_j):
        raise ValueError("q_j must be finite")
    batch = posterior_batch(prior, [float(q_j)], mu)
    z = float(batch.zero_mass[0])
    s = 1.0 - z
    if isinstance(batch, GaussianPosteriorBatch):
        a, sd = float(batch.cont_a[0]), math.sqrt(batch._v)
        grid = np.linspace(a - 8 * sd, a + 8 * sd, _GRID_POINTS)
        density = s * np.exp(norm_logpdf(grid - a, batch._v))
        h = grid[1] - grid[0]
        tw = np.full(_GRID_POINTS, h)
        tw[0] = tw[-1] = 0.5 * h
        return MixedPosterior(z, grid, density, density * tw)
    x, w = batch.nodes
    x, w = x[0], w[0]
    keep = w > 0
    x, w = x[keep], w[keep]
    # density at the nodes from the mass and the local jacobian dx/du
    u = batch.slab.to_u(x)
    logk = batch.slab.log_weight(u) + norm_logpdf(batch.q[0] - x, batch.mu) - batch.log_slab_evidence[0]
    dens_u = np.exp(logk)
    with np.errstate(divide="ignore", invalid="ignore"):
        dxdu = np.gradient(x, u) if x.size > 1 else np.ones_like(x)
        density = s * dens_u / dxdu
    return MixedPosterior(z, x, density, s * w)
