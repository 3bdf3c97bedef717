"""Variance, range and microergodic estimators for Matérn series with unit nugget.

Functional API (all take the data ``y``, the known ``nu`` and grid step
``delta``):

* :func:`ev_variance`: empirical variance minus the unit nugget.
* :func:`solve_cgem`: root in ``theta`` of the CGEM estimating function.
* :func:`cgemev_estimate`: the two combined (method ``GEV``).
* :func:`ml_estimate`, :func:`ml_fixed_b`, :func:`ml_fixed_c`,
  :func:`hybrid_estimate`: exact likelihood maximizers.
* :func:`nugget_variance_estimate`: differencing estimate of the noise level.

Searches run in log-parameters over a :class:`SearchBox`.  Every result
that lands on an edge of the box carries ``boundary_hit=True``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from .exceptions import EVNegative, NoSignChange, OptimizerStalled, ReparamOutOfBox
from .spectral import ModelParams, check_nu
from .toeplitz import build_kernel, cgem_parts, log_likelihood

METHODS = ("EV", "GEV", "ML", "ML0", "GE0", "MLc", "H")


@dataclass(frozen=True)
class SearchBox:
    """Compact search intervals for ``b`` and ``theta`` plus stopping rules.

    Attributes
    ----------
    scan_points : int
        Log-spaced points in the coarse sign scan of the CGEM root search and
        in 1-D likelihood scans.
    grid_points : int
        Points per axis of the coarse 2-D likelihood grid.
    xtol : float
        Absolute tolerance on log-parameters for refinement.
    edge_tol : float
        Log-distance to an edge below which ``boundary_hit`` is set.
    """

    b_lo: float
    b_hi: float
    theta_lo: float
    theta_hi: float
    scan_points: int = 64
    grid_points: int = 16
    xtol: float = 1e-8
    edge_tol: float = 1e-4

    def __post_init__(self):
        if not (0 < self.b_lo < self.b_hi and 0 < self.theta_lo < self.theta_hi):
            raise ValueError("search box needs 0 < lo < hi on both axes")
        if self.scan_points < 2 or self.grid_points < 2:
            raise ValueError("scans need at least two points")

    @classmethod
    def around(cls, b0, theta0, factor=100.0, **kwargs):
        """``[b0/factor, b0*factor] x [theta0/factor, theta0*factor]``."""
        return cls(b0 / factor, b0 * factor, theta0 / factor, theta0 * factor, **kwargs)

    def theta_grid(self, points=None):
        return np.geomspace(self.theta_lo, self.theta_hi, points or self.scan_points)

    def b_grid(self, points=None):
        return np.geomspace(self.b_lo, self.b_hi, points or self.grid_points)

    def at_edge(self, value, lo, hi):
        return bool(
            abs(math.log(value / lo)) < self.edge_tol or abs(math.log(hi / value)) < self.edge_tol
        )


@dataclass
class EstimateResult:
    """Fitted parameters from one estimator on one series.

    A result with ``boundary_hit=True`` is never reported as converged:
    the estimating equation or likelihood was not solved in the interior.
    """

    method: str
    nu: float
    b_hat: float = math.nan
    theta_hat: float = math.nan
    c_hat: float = math.nan
    converged: bool = True
    iterations: int = 0
    boundary_hit: bool = False
    multiple_roots: bool = False
    warnings: list = field(default_factory=list)
    seed: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if np.isfinite(self.b_hat) and np.isfinite(self.theta_hat):
            self.c_hat = microergodic(self.b_hat, self.theta_hat, self.nu)
        if self.boundary_hit:
            self.converged = False

    def to_dict(self):
        return asdict(self)


def microergodic(b, theta, nu):
    """``b * theta ** (2 nu)``."""
    return float(b) * float(theta) ** (2.0 * float(nu))


def ev_variance(y):
    """``|y|^2 / n - 1``; negative values mean the signal is not detectable."""
    y = np.asarray(y, dtype=float)
    if y.size < 1:
        raise ValueError("empty series")
    return float(y @ y / y.size - 1.0)


def nugget_variance_estimate(y):
    """Noise variance from squared first differences, halved."""
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("need at least two observations")
    d = np.diff(y)
    return float(d @ d / (2.0 * (y.size - 1)))


class KernelFactory:
    """Correlation kernels on a fixed grid, memoized by ``theta``."""

    def __init__(self, nu, delta, n, cache_size=256):
        self.nu = check_nu(nu)
        self.delta = float(delta)
        self.n = int(n)
        self._build = lru_cache(maxsize=cache_size)(self._make)

    def _make(self, theta):
        return build_kernel(ModelParams(self.nu, 1.0, theta, self.delta), self.n)

    def __call__(self, theta):
        return self._build(float(theta))


def _factory(y, nu, delta, kernel_factory):
    if kernel_factory is not None:
        return kernel_factory
    return KernelFactory(nu, delta, np.asarray(y).size)


# the O(n^2) recursion beats dense Cholesky for a single series at any n
BACKEND = "levinson"


# --------------------------------------------------------------------------
# CGEM root


@dataclass
class RootInfo:
    theta: float
    converged: bool
    boundary_hit: bool
    multiple: bool
    evaluations: int


def solve_cgem(b, y, nu, delta, box, kernel_factory=None):
    """Root in ``theta`` of ``y' A (I - A) y - tr A`` with ``b`` held fixed.

    A log-spaced sign scan brackets every root on the box.  The statistic is
    positive for long ranges and negative for short ones near the consistent
    root, but it drifts back toward zero as ``theta`` grows, which creates
    spurious far roots on finite samples.  The first downward (``+`` to
    ``-``) crossing is therefore taken; ``multiple`` reports whether other
    crossings exist.  Brent's method refines the bracket.

    Raises
    ------
    NoSignChange
        If the statistic keeps one sign on the whole box.  The exception
        carries ``info`` with the boundary point nearest the smallest
        ``|statistic|``.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    y = np.asarray(y, dtype=float)
    kf = _factory(y, nu, delta, kernel_factory)
    method = BACKEND
    evals = 0

    def stat(log_theta):
        nonlocal evals
        evals += 1
        quad, trA = cgem_parts(b, kf(math.exp(log_theta)), y, method)
        return (quad - trA) / trA

    grid = np.log(box.theta_grid())
    values = np.array([stat(t) for t in grid])
    left, right = values[:-1], values[1:]
    crossings = np.nonzero(((left > 0) & (right <= 0)) | ((left < 0) & (right >= 0)))[0]
    if crossings.size == 0:
        best = int(np.argmin(np.abs(values)))
        edge = 0 if best < grid.size / 2 else grid.size - 1
        info = RootInfo(math.exp(grid[edge]), False, True, False, evals)
        exc = NoSignChange(
            f"CGEM statistic keeps sign {np.sign(values[0]):+.0f} on "
            f"[{box.theta_lo:g}, {box.theta_hi:g}] at b={b:g}"
        )
        exc.info = info
        raise exc
    downward = crossings[left[crossings] > 0]
    pick = downward[0] if downward.size else crossings[0]
    lo, hi = grid[pick], grid[pick + 1]
    if values[pick] == 0.0:
        root = lo
    elif values[pick + 1] == 0.0:
        root = hi
    else:
        root = optimize.brentq(stat, lo, hi, xtol=box.xtol, rtol=4 * np.finfo(float).eps)
    theta = math.exp(root)
    edge = box.at_edge(theta, box.theta_lo, box.theta_hi)
    return RootInfo(theta, not edge, edge, crossings.size > 1, evals)


def _root_result(method, nu, b, y, delta, box, kernel_factory, seed):
    try:
        info = solve_cgem(b, y, nu, delta, box, kernel_factory)
        warnings = ["multiple roots"] if info.multiple else []
    except NoSignChange as exc:
        info = exc.info
        warnings = [str(exc)]
    return EstimateResult(
        method=method,
        nu=nu,
        b_hat=b,
        theta_hat=info.theta,
        converged=info.converged,
        iterations=info.evaluations,
        boundary_hit=info.boundary_hit,
        multiple_roots=info.multiple,
        warnings=warnings,
        seed=seed,
    )


def cgemev_estimate(y, nu, delta, box, kernel_factory=None, seed=None):
    """Empirical variance for ``b``, CGEM root for ``theta`` (method ``GEV``).

    Raises
    ------
    EVNegative
        If the empirical-variance estimate is not positive.
    """
    nu = check_nu(nu)
    b = ev_variance(y)
    if not b > 0:
        raise EVNegative(f"empirical variance estimate {b:.4g} is not positive")
    return _root_result("GEV", nu, b, y, delta, box, kernel_factory, seed)


def ge_fixed_b(y, b0, nu, delta, box, kernel_factory=None, seed=None):
    """CGEM root with ``b`` fixed at a known value (method ``GE0``)."""
    return _root_result("GE0", check_nu(nu), float(b0), y, delta, box, kernel_factory, seed)


# --------------------------------------------------------------------------
# likelihood maximizers


def _scan_then_brent(objective, lo, hi, points, xtol):
    """Minimize a 1-D function of a log-parameter on ``[lo, hi]``."""
    grid = np.linspace(lo, hi, points)
    values = np.array([objective(t) for t in grid])
    i = int(np.argmin(values))
    a, c = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    res = optimize.minimize_scalar(
        objective, bounds=(a, c), method="bounded", options={"xatol": xtol}
    )
    if not res.success or not np.isfinite(res.fun):
        raise OptimizerStalled(f"bounded 1-D search failed: {res.message}")
    x, fx = (res.x, res.fun) if res.fun <= values[i] else (grid[i], values[i])
    return float(x), float(fx), points + int(res.nfev)


def ml_estimate(y, nu, delta, box, kernel_factory=None, seed=None, start=None):
    """Joint maximum likelihood for ``(b, theta)`` (method ``ML``).

    A ``grid_points x grid_points`` log-spaced grid locates the basin and
    Nelder-Mead refines in log-parameters.  ``start`` adds one extra
    candidate node, e.g. a cheaper estimate.
    """
    nu = check_nu(nu)
    y = np.asarray(y, dtype=float)
    kf = _factory(y, nu, delta, kernel_factory)
    method = BACKEND
    bounds = [(math.log(box.b_lo), math.log(box.b_hi)), (math.log(box.theta_lo), math.log(box.theta_hi))]
    evals = 0

    def negll(x):
        nonlocal evals
        evals += 1
        return -log_likelihood(math.exp(x[0]), kf(math.exp(x[1])), y, method)

    nodes = [
        (lb, lt)
        for lb in np.log(box.b_grid())
        for lt in np.log(box.theta_grid(box.grid_points))
    ]
    if start is not None:
        sb, st = start
        if box.b_lo <= sb <= box.b_hi and box.theta_lo <= st <= box.theta_hi:
            nodes.append((math.log(sb), math.log(st)))
    values = [negll(np.array(nd)) for nd in nodes]
    best = int(np.argmin(values))
    x0 = np.array(nodes[best])
    step = np.array([0.5 * (hi - lo) / (box.grid_points - 1) for lo, hi in bounds])
    if start is not None and best == len(nodes) - 1 and len(nodes) > box.grid_points**2:
        step = np.minimum(step, 0.1)
    simplex = np.array([x0, x0 + [step[0], 0.0], x0 + [0.0, step[1]]])
    for k, (lo, hi) in enumerate(bounds):
        simplex[:, k] = np.clip(simplex[:, k], lo, hi)
        if np.ptp(simplex[:, k]) == 0:
            simplex[k + 1, k] = x0[k] - step[k]
    res = optimize.minimize(
        negll,
        x0,
        method="Nelder-Mead",
        bounds=bounds,
        options={"initial_simplex": simplex, "xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000},
    )
    if not np.isfinite(res.fun):
        raise OptimizerStalled("likelihood became non-finite during refinement")
    x = res.x if res.fun <= values[best] else x0
    b_hat, theta_hat = math.exp(x[0]), math.exp(x[1])
    edge = box.at_edge(b_hat, box.b_lo, box.b_hi) or box.at_edge(
        theta_hat, box.theta_lo, box.theta_hi
    )
    return EstimateResult(
        method="ML",
        nu=nu,
        b_hat=b_hat,
        theta_hat=theta_hat,
        converged=bool(res.success),
        iterations=evals,
        boundary_hit=edge,
        warnings=[] if res.success else [str(res.message)],
        seed=seed,
    )


def _theta_profile(method_tag, b, y, nu, delta, box, kernel_factory, seed):
    nu = check_nu(nu)
    y = np.asarray(y, dtype=float)
    kf = _factory(y, nu, delta, kernel_factory)
    method = BACKEND

    def negll(log_theta):
        return -log_likelihood(b, kf(math.exp(log_theta)), y, method)

    x, _, evals = _scan_then_brent(
        negll, math.log(box.theta_lo), math.log(box.theta_hi), box.scan_points, box.xtol
    )
    theta = math.exp(x)
    return EstimateResult(
        method=method_tag,
        nu=nu,
        b_hat=b,
        theta_hat=theta,
        iterations=evals,
        boundary_hit=box.at_edge(theta, box.theta_lo, box.theta_hi),
        seed=seed,
    )


def ml_fixed_b(y, b0, nu, delta, box, kernel_factory=None, seed=None):
    """Likelihood maximizer in ``theta`` with ``b`` known (method ``ML0``)."""
    return _theta_profile("ML0", float(b0), y, nu, delta, box, kernel_factory, seed)


def hybrid_estimate(y, nu, delta, box, kernel_factory=None, seed=None):
    """Likelihood maximizer in ``theta`` with the empirical variance plugged in (``H``).

    Raises
    ------
    EVNegative
        If the empirical-variance estimate is not positive.
    """
    b = ev_variance(y)
    if not b > 0:
        raise EVNegative(f"empirical variance estimate {b:.4g} is not positive")
    return _theta_profile("H", b, y, nu, delta, box, kernel_factory, seed)


def ml_fixed_c(y, c0, nu, delta, box, kernel_factory=None, seed=None):
    """Likelihood maximizer in ``b`` along ``b theta^(2 nu) = c0`` (method ``MLc``).

    The search runs over the part of ``B`` whose implied ``theta`` lies in
    ``Theta``.

    Raises
    ------
    ReparamOutOfBox
        If no ``b`` in the box maps to a ``theta`` inside the box.
    """
    nu = check_nu(nu)
    y = np.asarray(y, dtype=float)
    kf = _factory(y, nu, delta, kernel_factory)
    method = BACKEND
    lo = max(box.b_lo, c0 / box.theta_hi ** (2 * nu))
    hi = min(box.b_hi, c0 / box.theta_lo ** (2 * nu))
    if not lo < hi:
        raise ReparamOutOfBox(f"c0={c0:g} maps no b in the box to a theta in the box")

    def theta_of(b):
        return (c0 / b) ** (1.0 / (2 * nu))

    def negll(log_b):
        b = math.exp(log_b)
        return -log_likelihood(b, kf(theta_of(b)), y, method)

    x, _, evals = _scan_then_brent(negll, math.log(lo), math.log(hi), box.scan_points, box.xtol)
    b = math.exp(x)
    theta = theta_of(b)
    edge = box.at_edge(b, lo, hi)
    warnings = []
    if edge and (lo > box.b_lo or hi < box.b_hi):
        warnings.append("optimum on the edge implied by the theta interval")
    return EstimateResult(
        method="MLc",
        nu=nu,
        b_hat=b,
        theta_hat=theta,
        iterations=evals,
        boundary_hit=edge,
        warnings=warnings,
        seed=seed,
    )


def ev_estimate(y, nu, seed=None):
    """Empirical variance alone, as an :class:`EstimateResult` (method ``EV``)."""
    b = ev_variance(y)
    res = EstimateResult(method="EV", nu=check_nu(nu), b_hat=b, seed=seed)
    if not b > 0:
        res.converged = False
        res.warnings.append("empirical variance estimate is not positive")
    return res
