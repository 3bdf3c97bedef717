"""Durbin-Levinson recursion for symmetric positive definite Toeplitz systems.

One pass over the prediction-error decomposition
``T^{-1} = L^T D^{-1} L`` yields the log-determinant, the trace of the
inverse and ``T^{-1} Y`` for a block of right-hand sides, in ``O(n^2)``
operations per column and ``O(n)`` extra memory.

Sequences are stored time-reversed so every inner product runs over a
contiguous slice.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def levinson_solve(r, Y):
    """Factor the Toeplitz matrix with first row ``r`` and solve for ``Y``.

    Returns ``(logdet, trace_inverse, X, ok)``; ``ok`` is False when a
    prediction variance is not positive (matrix not positive definite).
    """
    n = r.shape[0]
    m = Y.shape[1]
    # reversed copies: Yr[j, n-1-t] = Y[t, j], rr[n-1-t] = r[t]
    Yr = np.empty((m, n))
    Xr = np.zeros((m, n))
    for j in range(m):
        for t in range(n):
            Yr[j, n - 1 - t] = Y[t, j]
    rr = r[::-1].copy()
    phi = np.zeros(n)
    v = r[0]
    X = np.zeros((n, m))
    if not v > 0.0:
        return 0.0, 0.0, X, False
    logdet = np.log(v)
    trinv = 1.0 / v
    for j in range(m):
        Xr[j, n - 1] = Yr[j, n - 1] / v
    for k in range(1, n):
        base = n - k
        # r_{k-1-i} = rr[base + i]
        acc = r[k]
        for i in range(k - 1):
            acc -= phi[i] * rr[base + i]
        kk = acc / v
        half = (k - 1) // 2
        for i in range(half):
            lo = phi[i]
            hi = phi[k - 2 - i]
            phi[i] = lo - kk * hi
            phi[k - 2 - i] = hi - kk * lo
        if (k - 1) % 2 == 1:
            phi[half] = phi[half] * (1.0 - kk)
        phi[k - 1] = kk
        v = v * (1.0 - kk * kk)
        if not v > 0.0:
            return logdet, trinv, X, False
        logdet += np.log(v)
        norm = 1.0
        for i in range(k):
            norm += phi[i] * phi[i]
        trinv += norm / v
        # y_{k-1-i} = Yr[j, base + i]: innovation of row k, then back-substitution
        for j in range(m):
            yrow = Yr[j]
            xrow = Xr[j]
            e = yrow[base - 1]
            for i in range(k):
                e -= phi[i] * yrow[base + i]
            e /= v
            xrow[base - 1] += e
            for i in range(k):
                xrow[base + i] -= phi[i] * e
    for j in range(m):
        for t in range(n):
            X[t, j] = Xr[j, n - 1 - t]
    return logdet, trinv, X, True
