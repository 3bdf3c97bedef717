"""Finite-sample linear algebra on the Matérn correlation Toeplitz matrix.

Everything that involves the nugget goes through ``S = I + b R``, whose
eigenvalues are at least one, so it stays well conditioned even when ``R``
itself is numerically singular on a fine grid.  With ``A = b R S^{-1}``::

    A y            = y - S^{-1} y
    tr A           = n - tr S^{-1}
    y' A (I - A) y = u' y - u' u,   u = S^{-1} y

Two exact backends are available: dense Cholesky and the ``O(n^2)``
Durbin-Levinson recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._levinson import levinson_solve
from .exceptions import NotPositiveDefinite
from .spectral import ModelParams, covariance

DENSE_CAP = 4096


@dataclass(frozen=True)
class CorrelationKernel:
    """First row ``K(delta j)``, ``j = 0..n-1``, of the correlation matrix ``R``."""

    first_row: np.ndarray
    params: ModelParams
    n: int

    def dense(self):
        return linalg.toeplitz(self.first_row)


def build_kernel(params, n):
    """Correlation kernel of ``params`` on ``n`` grid points."""
    n = int(n)
    if n < 2:
        raise ValueError("need at least two grid points")
    lags = params.delta * np.arange(n)
    row = np.asarray(covariance(params.nu, params.theta, lags), dtype=float)
    row.setflags(write=False)
    return CorrelationKernel(first_row=row, params=params, n=n)


def white_kernel(n, params=None):
    """Identity correlation, handy as a degenerate reference."""
    row = np.zeros(int(n))
    row[0] = 1.0
    row.setflags(write=False)
    return CorrelationKernel(first_row=row, params=params, n=int(n))


def _as_columns(y):
    y = np.asarray(y, dtype=float)
    return (y[:, None], True) if y.ndim == 1 else (y, False)


@dataclass
class NuggetSystem:
    """Factorization of ``I + b R`` shared by filter, trace and likelihood.

    Parameters
    ----------
    b : float
        Signal-to-noise variance ratio.
    kernel : CorrelationKernel
    method : {"auto", "cholesky", "levinson"}
        ``auto`` picks dense Cholesky up to ``DENSE_CAP`` points.

    Notes
    -----
    The Levinson backend factors and solves in one pass, so right-hand sides
    passed to :meth:`solve` trigger a fresh recursion; batch them.
    """

    b: float
    kernel: CorrelationKernel
    method: str = "auto"
    _chol: object = field(default=None, init=False, repr=False)
    _logdet: float = field(default=None, init=False, repr=False)
    _trinv: float = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if self.method == "auto":
            self.method = "cholesky" if self.kernel.n <= DENSE_CAP else "levinson"
        if self.method not in ("cholesky", "levinson"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def n(self):
        return self.kernel.n

    def _row(self):
        r = self.b * np.asarray(self.kernel.first_row, dtype=float)
        r[0] += 1.0
        return r

    def _cholesky(self):
        if self._chol is None:
            S = linalg.toeplitz(self._row())
            try:
                self._chol = linalg.cho_factor(S, lower=True, check_finite=False)
            except linalg.LinAlgError as exc:
                raise NotPositiveDefinite(f"I + bR is not positive definite: {exc}") from exc
            self._logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol[0]))))
        return self._chol

    def _levinson(self, Y):
        logdet, trinv, X, ok = levinson_solve(self._row(), np.ascontiguousarray(Y))
        if not ok:
            raise NotPositiveDefinite("Levinson recursion met a nonpositive prediction variance")
        self._logdet, self._trinv = float(logdet), float(trinv)
        return X

    def solve(self, y):
        """``(I + b R)^{-1} y`` for a vector or an ``(n, m)`` block."""
        Y, vec = _as_columns(y)
        if self.method == "cholesky":
            X = linalg.cho_solve(self._cholesky(), Y, check_finite=False)
        else:
            X = self._levinson(Y)
        return X[:, 0] if vec else X

    def logdet(self):
        if self._logdet is None:
            if self.method == "cholesky":
                self._cholesky()
            else:
                self._levinson(np.zeros((self.n, 1)))
        return self._logdet

    def trace_inverse(self):
        if self._trinv is None:
            if self.method == "cholesky":
                L = self._cholesky()[0]
                Linv = linalg.solve_triangular(
                    L, np.eye(self.n), lower=True, check_finite=False
                )
                self._trinv = float(np.sum(Linv * Linv))
            else:
                self._levinson(np.zeros((self.n, 1)))
        return self._trinv

    def solve_with_trace(self, y):
        """``(S^{-1} y, tr S^{-1})``; one recursion on the Levinson backend."""
        x = self.solve(y)
        return x, self.trace_inverse()


def apply_filter(b, kernel, y, method="auto"):
    """``A y`` with ``A = b R (I + b R)^{-1}``."""
    y = np.asarray(y, dtype=float)
    return y - NuggetSystem(b, kernel, method).solve(y)


def rademacher_probes(n, k, seed):
    rng = np.random.default_rng(seed)
    return rng.choice(np.array([-1.0, 1.0]), size=(n, k))


def trace_filter(b, kernel, mode="exact", probes=64, seed=0, method="auto"):
    """``tr A``; exact, or a Hutchinson estimate with its standard error.

    Returns
    -------
    float
        In exact mode.
    (estimate, stderr)
        In ``"randomized"`` mode, from ``probes`` symmetric +-1 vectors.
    """
    system = NuggetSystem(b, kernel, method)
    if mode == "exact":
        return system.n - system.trace_inverse()
    if mode != "randomized":
        raise ValueError(f"unknown mode {mode!r}")
    if probes < 1:
        raise ValueError("need at least one probe")
    Z = rademacher_probes(system.n, probes, seed)
    samples = system.n - np.einsum("ij,ij->j", Z, system.solve(Z))
    stderr = samples.std(ddof=1) / math.sqrt(probes) if probes > 1 else math.inf
    return float(samples.mean()), float(stderr)


def cgem_parts(b, kernel, y, method="auto"):
    """``(y' A (I - A) y, tr A)``; ``y`` may be an ``(n, m)`` block."""
    system = NuggetSystem(b, kernel, method)
    Y, vec = _as_columns(y)
    U, trinv = system.solve_with_trace(Y)
    quad = np.einsum("ij,ij->j", U, Y) - np.einsum("ij,ij->j", U, U)
    trA = system.n - trinv
    return (float(quad[0]) if vec else quad), trA


def cgem_statistic(b, kernel, y, method="auto"):
    """Estimating function ``y' A (I - A) y - tr A`` (root in theta gives CGEM-EV)."""
    quad, trA = cgem_parts(b, kernel, y, method)
    return quad - trA


def gibbs_energy(kernel, z):
    """``z' R^{-1} z / n``; ill conditioned on fine grids, desk scale only."""
    R = kernel.dense()
    try:
        factor = linalg.cho_factor(R, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"correlation matrix is not positive definite: {exc}") from exc
    Z, vec = _as_columns(z)
    q = np.einsum("ij,ij->j", Z, linalg.cho_solve(factor, Z, check_finite=False)) / kernel.n
    return float(q[0]) if vec else q


def log_likelihood(b, kernel, y, method="auto"):
    """Gaussian log-likelihood of ``y`` under covariance ``I + b R``."""
    system = NuggetSystem(b, kernel, method)
    Y, vec = _as_columns(y)
    U = system.solve(Y)
    quad = np.einsum("ij,ij->j", U, Y)
    ll = -0.5 * (quad + system.logdet() + system.n * math.log(2 * math.pi))
    return float(ll[0]) if vec else ll
