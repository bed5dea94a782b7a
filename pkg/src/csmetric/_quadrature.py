"""Gauss-Legendre rules, batched composite rules and a vectorised adaptive
integrator used for the outer q-integrals."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gl_rule(order):
    t, w = np.polynomial.legendre.leggauss(order)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@lru_cache(maxsize=64)
def _unit_composite(panels, order):
    """Nodes in panel units (0 to ``panels``) and matching half-width weights."""
    t, w = gl_rule(order)
    offs = ((np.arange(panels) + 0.5)[:, None] + 0.5 * t).ravel()
    ws = np.tile(0.5 * w, panels)
    offs.setflags(write=False)
    ws.setflags(write=False)
    return offs, ws


def composite_rule(a, b, panels, order):
    """Row-wise composite Gauss-Legendre rule on ``[a_i, b_i]``.

    Returns ``(nodes, weights)`` of shape ``(len(a), panels * order)``.
    Degenerate rows (``a == b``) get zero weights.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    offs, ws = _unit_composite(int(panels), int(order))
    h = ((b - a) / panels)[:, None]
    return a[:, None] + h * offs, h * ws


class QuadratureError(RuntimeError):
    """Adaptive quadrature stopped before reaching its tolerance."""

    def __init__(self, message, value, error):
        super().__init__(message)
        self.value = value
        self.error = error


def adaptive_quad(f, breakpoints, rel_tol=1e-8, abs_tol=0.0, order=10, max_rounds=60, max_panels=200_000):
    """Adaptive composite Gauss-Legendre integral of a vectorised ``f``.

    Each panel is integrated with one ``order``-point rule and with the same
    rule on both halves; the difference is the panel's error estimate. Panels
    whose error exceeds their share of the global tolerance are bisected and
    all new panels are evaluated in a single call to ``f``.

    Returns ``(value, error_estimate)``; raises :class:`QuadratureError`
    (carrying the achieved tolerance) when the budget runs out.
    """
    edges = np.unique(np.asarray(breakpoints, dtype=float))
    if edges.size < 2:
        return 0.0, 0.0
    t, w = gl_rule(order)
    total_width = edges[-1] - edges[0]

    def panel_estimates(a, b):
        mid = 0.5 * (a + b)
        lefts = np.concatenate([a, a, mid])
        rights = np.concatenate([b, mid, b])
        half = 0.5 * (rights - lefts)
        pts = 0.5 * (lefts + rights)[:, None] + half[:, None] * t
        vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
        sums = (vals * w).sum(axis=1) * half
        k = a.size
        coarse = sums[:k]
        fine = sums[k:2 * k] + sums[2 * k:]
        return fine, np.abs(fine - coarse)

    a, b = edges[:-1], edges[1:]
    vals, errs = panel_estimates(a, b)
    for _ in range(max_rounds):
        value = vals.sum()
        err = errs.sum()
        tol = max(abs_tol, rel_tol * abs(value))
        if err <= tol:
            return float(value), float(err)
        share = tol * (b - a) / total_width
        bad = errs > share
        # guarantee progress on the worst panel
        bad[np.argmax(errs)] = True
        if a.size + bad.sum() > max_panels:
            break
        mid = 0.5 * (a[bad] + b[bad])
        new_a = np.concatenate([a[bad], mid])
        new_b = np.concatenate([mid, b[bad]])
        nv, ne = panel_estimates(new_a, new_b)
        keep = ~bad
        a = np.concatenate([a[keep], new_a])
        b = np.concatenate([b[keep], new_b])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        order_idx = np.argsort(a, kind="stable")
        a, b, vals, errs = a[order_idx], b[order_idx], vals[order_idx], errs[order_idx]
    value, err = float(vals.sum()), float(errs.sum())
    raise QuadratureError(f"adaptive quadrature did not converge: estimate {value!r}, error {err!r}", value, err)
