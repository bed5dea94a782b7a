"""Matrix-vector products with a fixed reduction order.

BLAS ``gemv`` may split reductions differently depending on the thread
count; these helpers go through numpy's own reductions instead so the
result only depends on the operands.
"""
import numpy as np

_BLOCK = 1 << 22  # elements per temporary


def matvec(a, x):
    """``a @ x`` with pairwise summation along each row."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {x.shape}")
    m, n = a.shape
    rows = max(1, _BLOCK // max(n, 1))
    out = np.empty(m)
    for start in range(0, m, rows):
        out[start:start + rows] = np.multiply(a[start:start + rows], x).sum(axis=1)
    return out


def rmatvec(a, s):
    """``a.T @ s`` accumulated over rows in ascending order."""
    a = np.asarray(a, dtype=float)
    s = np.asarray(s, dtype=float)
    if a.ndim != 2 or s.ndim != 1 or a.shape[0] != s.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape}.T @ {s.shape}")
    m, n = a.shape
    rows = max(1, _BLOCK // max(n, 1))
    out = np.zeros(n)
    for start in range(0, m, rows):
        out += np.multiply(a[start:start + rows], s[start:start + rows, None]).sum(axis=0)
    return out
