"""Matérn spectral densities, aliasing, Wiener filters and log-derivatives.

Frequencies ``omega`` live on the real line (continuous time), frequencies
``lam`` live on ``[-pi, pi]`` (the sampled series).  Every aliased object
depends on the grid step and the inverse range only through
``alpha = delta * theta``.

The aliasing sum is evaluated as a finite sum over ``|k| <= K`` plus the
leading-order algebraic tail ``C alpha^(2 nu) |x|^-(2 nu + 1)``, summed in
closed form with the Hurwitz zeta function.  ``K`` is chosen from an explicit
bound on what the tail approximation leaves out, so the result carries a
certified error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .exceptions import QuadratureFailure, TruncationBudgetExceeded

TWO_PI = 2.0 * np.pi


def check_nu(nu):
    """Validate a Matérn regularity index and return it as a float."""
    nu = float(nu)
    if not np.isfinite(nu) or nu < 0.5:
        raise ValueError(f"regularity index must be >= 1/2, got {nu}")
    return nu


@dataclass(frozen=True)
class ModelParams:
    """A candidate Matérn-plus-unit-nugget model on a regular grid.

    Attributes
    ----------
    nu : float
        Regularity index, ``nu >= 1/2``.
    b : float
        Signal variance, in units of the (known) noise variance.
    theta : float
        Inverse range.
    delta : float
        Grid step.
    """

    nu: float
    b: float
    theta: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "nu", check_nu(self.nu))
        for name in ("b", "theta", "delta"):
            value = float(getattr(self, name))
            if not value > 0 or not np.isfinite(value):
                raise ValueError(f"{name} must be positive and finite, got {value}")
            object.__setattr__(self, name, value)

    @property
    def alpha(self):
        return self.delta * self.theta

    @property
    def c(self):
        """Microergodic parameter ``b * theta ** (2 nu)``."""
        return self.b * self.theta ** (2.0 * self.nu)


@dataclass(frozen=True)
class AliasingControl:
    """Truncation policy for the aliasing sum.

    ``tol`` bounds the absolute error of the aliased density and is tightened
    to ``tol * min(1, g_min)`` where ``g_min`` is a lower bound of the density
    on ``[-pi, pi]``, so small densities (large ``nu``, small ``alpha``) keep
    relative accuracy as well.  With ``tail_correction=False`` the plain
    truncated sum is used and its tail bounded term by term.
    """

    tol: float = 1e-10
    k_max: int = 10**6
    tail_correction: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.k_max) < 1:
            raise ValueError("k_max must be >= 1")


DEFAULT_CONTROL = AliasingControl()


def matern_constant(nu):
    """Normalizing constant ``Gamma(nu + 1/2) / (sqrt(pi) Gamma(nu))``."""
    nu = check_nu(nu)
    return math.exp(math.lgamma(nu + 0.5) - math.lgamma(nu)) / math.sqrt(math.pi)


def spectral_density_unaliased(nu, theta, omega):
    """Continuous-time Matérn spectral density with unit total mass."""
    c_nu = matern_constant(nu)
    omega = np.asarray(omega, dtype=float)
    return c_nu * theta ** (2 * nu) / (theta**2 + omega**2) ** (nu + 0.5)


def _half_integer_order(nu):
    p = nu - 0.5
    if abs(p - round(p)) < 1e-12 and round(p) <= 20:
        return int(round(p))
    return None


def _half_integer_covariance(p, x):
    # exp(-x) * p!/(2p)! * sum_i (p+i)!/(i!(p-i)!) (2x)^(p-i)
    poly = np.zeros_like(x)
    for i in range(p + 1):
        coef = math.factorial(p + i) / (math.factorial(i) * math.factorial(p - i))
        poly = poly + coef * (2.0 * x) ** (p - i)
    return np.exp(-x) * poly * math.factorial(p) / math.factorial(2 * p)


def _cosine_transform(nu, x, epsabs):
    # K(t) = 2 C_nu int_0^inf (1 + u^2)^-(nu + 1/2) cos(u x) du with x = theta t
    if x == 0.0:
        return 1.0
    value, err = integrate.quad(
        lambda u: (1.0 + u * u) ** (-(nu + 0.5)),
        0.0,
        np.inf,
        weight="cos",
        wvar=x,
        epsabs=epsabs,
        limlst=200,
    )
    value *= 2.0 * matern_constant(nu)
    err *= 2.0 * matern_constant(nu)
    if not np.isfinite(value) or err > 10 * epsabs:
        raise QuadratureFailure(
            f"cosine transform at nu={nu}, theta*t={x}: error {err:.2e} above {epsabs:.1e}"
        )
    return value


def covariance(nu, theta, t, method="auto", epsabs=1e-11):
    """Matérn correlation ``K_{nu,theta}(t)``.

    Half-integer orders use the exponential-polynomial closed form; other
    orders (or ``method="quadrature"``) use a numeric cosine transform of the
    spectral density.

    Raises
    ------
    QuadratureFailure
        If the numeric cosine transform does not reach ``epsabs``.
    """
    nu = check_nu(nu)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("lag must be nonnegative")
    x = theta * t
    p = _half_integer_order(nu)
    if method == "auto" and p is not None:
        return _half_integer_covariance(p, x)
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    flat = np.array([_cosine_transform(nu, float(xi), epsabs) for xi in x.ravel()])
    return flat.reshape(x.shape) if x.ndim else float(flat[0])


# --------------------------------------------------------------------------
# aliasing


def _term_bound(nu, alpha, K, tail_correction):
    """Bound on both one-sided tails left out beyond ``|k| = K``."""
    c_nu = matern_constant(nu)
    s = 2.0 * nu + 1.0
    if tail_correction:
        # 0 <= 1 - (1 + u)^-(nu+1/2) <= (nu+1/2) u with u = alpha^2/x^2
        return (
            2.0 * c_nu * (nu + 0.5) * alpha ** (2 * nu + 2)
            * TWO_PI ** (-(s + 2)) * special.zeta(s + 2, K + 0.5)
        )
    return 2.0 * c_nu * alpha ** (2 * nu) * TWO_PI ** (-s) * special.zeta(s, K + 0.5)


def _density_floor(nu, alpha):
    return float(spectral_density_unaliased(nu, alpha, np.pi))


@lru_cache(maxsize=4096)
def truncation_index(nu, alpha, ctrl=DEFAULT_CONTROL):
    """Smallest ``K`` whose certified truncation error meets ``ctrl``.

    The bound is scaled by ``4 nu + 3`` so that the log-derivative inherits
    the same relative accuracy as the density.

    Raises
    ------
    TruncationBudgetExceeded
        If ``K`` would exceed ``ctrl.k_max``.
    """
    nu = check_nu(nu)
    target = ctrl.tol * min(1.0, _density_floor(nu, alpha)) / (4.0 * nu + 3.0)

    def ok(K):
        return _term_bound(nu, alpha, K, ctrl.tail_correction) <= target

    if ok(0):
        return 0
    hi = 1
    while not ok(hi):
        if hi >= ctrl.k_max:
            raise TruncationBudgetExceeded(
                f"aliasing sum at nu={nu}, alpha={alpha} needs more than "
                f"k_max={ctrl.k_max} terms for tol={ctrl.tol}"
            )
        hi = min(2 * hi, int(ctrl.k_max))
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def aliased_terms(nu, alpha, lam, ctrl=DEFAULT_CONTROL):
    """Aliased density ``g_{nu,alpha}(lam)`` and its ``alpha``-derivative.

    Returns
    -------
    g, dg : ndarray
        Values of the aliasing sum and of its term-wise derivative in alpha.
    """
    nu = check_nu(nu)
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    # the sum is even in lam; folding makes that exact in floating point
    lam = np.abs(np.asarray(lam, dtype=float))
    K = truncation_index(nu, alpha, ctrl)
    c_nu = matern_constant(nu)
    p = nu + 0.5
    a2 = alpha * alpha
    scale = c_nu * alpha ** (2 * nu)

    g = np.zeros_like(lam)
    slope = np.zeros_like(lam)  # sum of g*(x) * alpha^2 / (alpha^2 + x^2)
    for k in range(-K, K + 1):
        x2 = (lam + TWO_PI * k) ** 2
        term = scale / (a2 + x2) ** p
        g += term
        slope += term * a2 / (a2 + x2)
    if ctrl.tail_correction and K < ctrl.k_max:
        s = 2.0 * nu + 1.0
        q = lam / TWO_PI
        tail = scale * TWO_PI ** (-s) * (
            special.zeta(s, K + 1 + q) + special.zeta(s, K + 1 - q)
        )
        g += tail
    # d/dalpha g*(x) = g*(x) (2 nu - (2 nu + 1) alpha^2 / (alpha^2 + x^2)) / alpha
    dg = (2 * nu * g - (2 * nu + 1) * slope) / alpha
    return g, dg


def spectral_density_aliased(nu, alpha, lam, ctrl=DEFAULT_CONTROL):
    """Spectral density of the sampled series on ``[-pi, pi]``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(np.abs(lam) > np.pi + 1e-12):
        raise ValueError("lam must lie in [-pi, pi]")
    return aliased_terms(nu, alpha, lam, ctrl)[0]


def log_density_derivative_aliased(nu, theta, delta, lam, ctrl=DEFAULT_CONTROL):
    """``d log g^delta / d theta`` from the term-wise differentiated sum."""
    g, dg = aliased_terms(nu, delta * theta, lam, ctrl)
    return delta * dg / g


def log_density_derivative_unaliased(nu, alpha, lam):
    """``d log g*_{nu,alpha} / d alpha`` evaluated at ``lam``."""
    lam = np.asarray(lam, dtype=float)
    G = 1.0 / (1.0 + (lam / alpha) ** 2)
    return (2 * nu - (2 * nu + 1) * G) / alpha


def filter_from_density(b, g):
    """Wiener filter ``b g / (b g + 1/(2 pi))`` for a density array."""
    bg = b * np.asarray(g, dtype=float)
    return bg / (bg + 1.0 / TWO_PI)


def wiener_filter(b, nu, theta, delta, lam, ctrl=DEFAULT_CONTROL):
    """Frequency response of the optimal signal-extraction filter."""
    return filter_from_density(b, spectral_density_aliased(nu, delta * theta, lam, ctrl))


def wiener_filter_unaliased(b, nu, alpha, lam):
    """Same filter built on the unaliased density ``g*_{nu,alpha}``."""
    return filter_from_density(b, spectral_density_unaliased(nu, alpha, lam))


def ar1_spectral_density(alpha, lam):
    """Spectral density of the sampled exponential (AR(1)) correlation."""
    rho = np.exp(-alpha)
    lam = np.asarray(lam, dtype=float)
    # cancellation-free forms of 1 - rho^2 and 1 - 2 rho cos(lam) + rho^2
    num = -np.expm1(-2.0 * alpha)
    den = np.expm1(-alpha) ** 2 + 4.0 * rho * np.sin(lam / 2.0) ** 2
    return num / den / TWO_PI


def spectrum_table(params, lam, ctrl=DEFAULT_CONTROL):
    """Columns ``lambda, g_unaliased, g_aliased, filter, h`` for debugging dumps."""
    lam = np.asarray(lam, dtype=float)
    g, dg = aliased_terms(params.nu, params.alpha, lam, ctrl)
    return {
        "lambda": lam,
        "g_unaliased": spectral_density_unaliased(params.nu, params.alpha, lam),
        "g_aliased": g,
        "filter": filter_from_density(params.b, g),
        "h": params.delta * dg / g,
    }
