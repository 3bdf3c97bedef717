"""Spectral quadrature and the large-sample asymptotics of ML and CGEM-EV.

All integrals run over ``[-pi, pi]``.  Integrands are even in frequency and,
for a fine grid, sharply peaked at zero: the density has width ``alpha`` and
the Wiener filter a cutoff near ``alpha ** (2 nu / (2 nu + 1))``.  The
integrator folds the interval, seeds geometric breakpoints at those scales
and refines by bisection with a Gauss-Legendre panel rule.

Covariance entries are stored without the ``4 pi`` factor of the limiting
normal laws; see :func:`per_sample_variance`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .exceptions import CGEMError, DegenerateInformation, DegenerateWeightedMean, QuadratureFailure
from .spectral import (
    DEFAULT_CONTROL,
    TWO_PI,
    ModelParams,
    aliased_terms,
    check_nu,
    filter_from_density,
    matern_constant,
)

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(16)

DEGENERACY_RATIO = 1e-12


def _panel_rule(f, a, b):
    """Gauss-Legendre estimate on every panel ``[a_i, b_i]``; shape (m, panels)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(f(x.ravel()), dtype=float)
    vals = vals.reshape((-1,) + x.shape)
    return np.einsum("mpq,q->mp", vals, _WEIGHTS) * half


def seed_breakpoints(scales, upper=np.pi):
    """Geometric breakpoints around each peak scale, plus forced refinement.

    Every scale ``s`` contributes ``s * 2**j`` for ``j`` in ``-6..`` up to
    ``upper`` and eight uniform panels on ``[0, min(10 s, upper)]``.
    """
    pts = {0.0, float(upper)}
    for s in scales:
        s = float(s)
        if not s > 0:
            continue
        for j in range(-6, 64):
            p = s * 2.0**j
            if p >= upper:
                break
            pts.add(p)
        top = min(10.0 * s, upper)
        pts.update(np.linspace(0.0, top, 9).tolist())
    return np.array(sorted(pts))


def integrate_spectral(f, tol=1e-9, rtol=1e-11, scales=(), even=True, max_panels=200_000):
    """Adaptive integral of ``f`` over ``[-pi, pi]``.

    Parameters
    ----------
    f : callable
        Maps a 1-D frequency array to values of shape ``(n,)`` or ``(m, n)``;
        vector-valued integrands are refined jointly.
    tol, rtol : float
        A component is converged when its error estimate is below
        ``max(tol, rtol * |integral|)``.
    scales : sequence of float
        Peak widths used to seed breakpoints near zero.
    even : bool
        Integrate over ``[0, pi]`` and double.

    Raises
    ------
    QuadratureFailure
        If more than ``max_panels`` panels are needed.
    """
    lo = 0.0 if even else -np.pi
    edges = seed_breakpoints(scales)
    if not even:
        edges = np.unique(np.concatenate([-edges[::-1], edges]))
    edges = edges[edges >= lo]
    a, b = edges[:-1], edges[1:]
    scalar = np.ndim(f(np.array([0.5]))) == 1
    q = _panel_rule(f, a, b)

    done = np.zeros(q.shape[0])
    span = np.pi - lo
    while True:
        m = 0.5 * (a + b)
        ql = _panel_rule(f, a, m)
        qr = _panel_rule(f, m, b)
        child = ql + qr
        err = np.abs(q - child)
        total = done + child.sum(axis=1)
        budget = np.maximum(tol, rtol * np.abs(total))
        share = budget[:, None] * (b - a)[None, :] / span
        # panels resolved to rounding level cannot improve by bisection
        noise = 64 * np.finfo(float).eps * (np.abs(ql) + np.abs(qr))
        ok = np.all(err <= np.maximum(share, noise), axis=0)
        done += child[:, ok].sum(axis=1)
        if ok.all():
            break
        keep = ~ok
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        q = np.concatenate([ql[:, keep], qr[:, keep]], axis=1)
        if a.size > max_panels:
            raise QuadratureFailure(
                f"adaptive quadrature exceeded {max_panels} panels "
                f"(remaining error {err[:, keep].sum(axis=1).max():.2e})"
            )
    result = 2.0 * done if even else done
    return float(result[0]) if scalar else result


def filter_scale(nu, b, alpha):
    """Frequency where the Wiener filter drops to one half (unaliased)."""
    return alpha ** (2 * nu / (2 * nu + 1)) * (TWO_PI * matern_constant(nu) * b) ** (
        1.0 / (2 * nu + 1)
    )


def _scales(params):
    return (params.alpha, filter_scale(params.nu, params.b, params.alpha))


# --------------------------------------------------------------------------
# spectral functionals


@dataclass(frozen=True)
class SpectralFunctionals:
    """Integrals over ``[-pi, pi]`` that enter every asymptotic formula.

    ``a``, ``g`` and ``h`` are the Wiener filter, aliased density and
    theta-log-derivative at the true parameters; ``kappa = 2 nu / theta``.
    """

    params: ModelParams
    int_a: float
    int_a2: float
    int_a2_h: float
    int_a2_h2: float
    int_a2_hc2: float
    int_g: float
    int_ainv2_g2: float
    int_f2: float
    j_h0: float
    j_g_over_a2: float


def spectral_functionals(params, tol=1e-9, rtol=1e-11, ctrl=DEFAULT_CONTROL):
    """Compute every :class:`SpectralFunctionals` entry in one adaptive pass."""
    nu, b, theta, delta = params.nu, params.b, params.theta, params.delta
    kappa = 2 * nu / theta

    def integrand(lam):
        g, dg = aliased_terms(nu, delta * theta, lam, ctrl)
        h = delta * dg / g
        a = filter_from_density(b, g)
        a2 = a * a
        return np.stack(
            [
                a,
                a2,
                a2 * h,
                a2 * h * h,
                a2 * (h - kappa) ** 2,
                g,
                (g / a) ** 2,
                (b * g + 1.0 / TWO_PI) ** 2,
            ]
        )

    vals = integrate_spectral(integrand, tol=tol, rtol=rtol, scales=_scales(params))
    int_a, int_a2, int_a2_h, int_a2_h2, int_a2_hc2, int_g, int_ainv2_g2, int_f2 = vals
    if abs(int_a2_h) < DEGENERACY_RATIO * int_a2:
        j_h0 = math.inf
    else:
        j_h0 = int_a2_h2 * int_a2 / int_a2_h**2 - 1.0
    # weights a^2 applied to g / a^2 give the plain mass of g
    j_g = int_a2 * int_ainv2_g2 / int_g**2 - 1.0
    return SpectralFunctionals(
        params=params,
        int_a=float(int_a),
        int_a2=float(int_a2),
        int_a2_h=float(int_a2_h),
        int_a2_h2=float(int_a2_h2),
        int_a2_hc2=float(int_a2_hc2),
        int_g=float(int_g),
        int_ainv2_g2=float(int_ainv2_g2),
        int_f2=float(int_f2),
        j_h0=float(j_h0),
        j_g_over_a2=float(j_g),
    )


def weighted_cv(f, params, tol=1e-9, rtol=1e-11, ctrl=DEFAULT_CONTROL):
    """Weighted coefficient of variation of ``f`` under the weight ``a**2``.

    ``f`` is called as ``f(lam, g, h)`` with the aliased density and its
    theta-log-derivative at ``params``.  The variance is integrated in
    centered form after a first pass for the weighted mean.

    Raises
    ------
    DegenerateWeightedMean
        If the weighted mean of ``f`` is numerically zero.
    """
    nu, b, theta, delta = params.nu, params.b, params.theta, params.delta
    scales = _scales(params)

    def pieces(lam):
        g, dg = aliased_terms(nu, delta * theta, lam, ctrl)
        h = delta * dg / g
        return filter_from_density(b, g) ** 2, np.broadcast_to(f(lam, g, h), lam.shape)

    def first(lam):
        w, v = pieces(lam)
        return np.stack([w, w * v])

    int_w, int_wf = integrate_spectral(first, tol=tol, rtol=rtol, scales=scales)
    if abs(int_wf) < DEGENERACY_RATIO * int_w:
        raise DegenerateWeightedMean(
            f"weighted mean {int_wf:.3e} is negligible against total weight {int_w:.3e}"
        )
    mean = int_wf / int_w

    def second(lam):
        w, v = pieces(lam)
        return w * (v - mean) ** 2

    spread = integrate_spectral(second, tol=tol * mean**2, rtol=rtol, scales=scales)
    return spread / int_w / mean**2


# --------------------------------------------------------------------------
# psi functional


def psi(delta, b, theta, b0, theta0, nu, tol=1e-9, rtol=1e-11, ctrl=DEFAULT_CONTROL):
    """Large-sample limit of the normalized CGEM statistic minus one."""
    nu = check_nu(nu)
    candidate = ModelParams(nu, b, theta, delta)
    truth = ModelParams(nu, b0, theta0, delta)

    def integrand(lam):
        g = aliased_terms(nu, delta * theta, lam, ctrl)[0]
        g0 = aliased_terms(nu, delta * theta0, lam, ctrl)[0]
        a = filter_from_density(b, g)
        return np.stack([a, a * a * (b0 * g0 / (b * g) - 1.0)])

    int_a, num = integrate_spectral(
        integrand, tol=tol, rtol=rtol, scales=_scales(candidate) + _scales(truth)
    )
    return float(num / int_a)


def psi_small_delta(b, theta, b0, theta0, nu):
    """Small grid-step equivalent of :func:`psi`."""
    ratio = b0 * theta0 ** (2 * nu) / (b * theta ** (2 * nu))
    return 2 * nu / (2 * nu + 1) * (ratio - 1.0)


# --------------------------------------------------------------------------
# asymptotic covariances


def _check_information(sf):
    if not abs(sf.int_a2_h) >= DEGENERACY_RATIO * sf.int_a2:
        raise DegenerateInformation(
            f"int a^2 h = {sf.int_a2_h:.3e} vanishes against int a^2 = {sf.int_a2:.3e}"
        )
    if not (sf.j_h0 > 0 and np.isfinite(sf.j_h0)):
        raise DegenerateInformation(f"J(h) = {sf.j_h0} is not a positive finite number")


def ml_asymptotic_cov(sf):
    """``(sigma1_sq, sigma12, sigma2_sq)`` of the joint ML estimator of ``(b, theta)``."""
    _check_information(sf)
    b0 = sf.params.b
    common = 1.0 / (sf.int_a2_h**2 * sf.j_h0)
    return (
        common * b0**2 * sf.int_a2_h2,
        -common * b0 * sf.int_a2_h,
        common * sf.int_a2,
    )


def gev_asymptotic_cov(sf):
    """``(v1, v12, v2)`` of the CGEM-EV estimator of ``(b, theta)``."""
    _check_information(sf)
    b0 = sf.params.b
    jg = sf.j_g_over_a2
    return (
        b0**2 * sf.int_ainv2_g2,
        -b0 * jg / sf.int_a2_h,
        jg * sf.int_a2 / sf.int_a2_h**2,
    )


def microergodic_asymptotics(sf):
    """``(sigma3_sq, v3)`` for ML and CGEM-EV estimates of ``c = b theta^(2 nu)``.

    ``v3`` is the delta-method variance of ``b theta^(2 nu)`` under the joint
    CGEM-EV law, which reduces to
    ``c^2 (J_g (H - kappa W)^2 + H^2) / (W H^2)`` with ``H = int a^2 h`` and
    ``W = int a^2``.
    """
    _check_information(sf)
    p = sf.params
    c0 = p.c
    kappa = 2 * p.nu / p.theta
    H, W = sf.int_a2_h, sf.int_a2
    sigma3_sq = c0**2 * sf.int_a2_hc2 / (H**2 * sf.j_h0)
    v3 = c0**2 * (sf.j_g_over_a2 * (H - kappa * W) ** 2 + H**2) / (W * H**2)
    return sigma3_sq, v3


def delta_method_c_variance(params, cov):
    """Variance of ``b theta^(2 nu)`` from a ``(var_b, cov_b_theta, var_theta)`` triple."""
    var_b, cov_bt, var_t = cov
    db = params.theta ** (2 * params.nu)
    dt = 2 * params.nu * params.c / params.theta
    return db * db * var_b + 2 * db * dt * cov_bt + dt * dt * var_t


def fixed_parameter_asymptotics(sf):
    """Variances with ``b`` known (theta estimators) or ``c`` known (b estimators).

    Returns
    -------
    var_theta_ml0, var_theta_ge0, I0, sigma4_sq, I4
    """
    _check_information(sf)
    if not sf.int_a2_hc2 > 0:
        raise DegenerateInformation("int a^2 (h - 2 nu / theta)^2 vanishes")
    p = sf.params
    kappa = 2 * p.nu / p.theta
    var_ml0 = 1.0 / sf.int_a2_h2
    var_ge0 = sf.int_a2 / sf.int_a2_h**2
    sigma4_sq = p.b**2 * kappa**2 / sf.int_a2_hc2
    v1 = p.b**2 * sf.int_ainv2_g2
    return var_ml0, var_ge0, var_ge0 / var_ml0, sigma4_sq, v1 / sigma4_sq


def ineff_closed_form(nu):
    """Common small grid-step limit of the CGEM-EV to ML inefficiencies."""
    nu = check_nu(nu)
    lg = special.gammaln
    log_ratio = (
        2 * lg(nu + 0.5) + lg(2 * nu + 0.5) - 2 * lg(nu) - lg(2 * nu + 1)
    )
    return math.sqrt(math.pi) / 2 * ((2 * nu + 1) / (2 * nu)) ** 2 * math.exp(log_ratio)


def ineff_fraction(nu):
    """Exact rational value of :func:`ineff_closed_form` for half-integer ``nu``.

    Returns None for other orders, where the limit is irrational.
    """
    nu = check_nu(nu)
    m = nu - 0.5
    if m != int(m):
        return None
    m = int(m)
    f = math.factorial
    # Gamma(m + 1/2) and Gamma(2m + 3/2) carry sqrt(pi), which cancels
    g_nu = Fraction(f(2 * m), 4**m * f(m))
    g_2nu_half = Fraction(f(4 * m + 2), 4 ** (2 * m + 1) * f(2 * m + 1))
    ratio = Fraction(f(m) ** 2) * g_2nu_half / (g_nu**2 * f(2 * m + 1))
    return Fraction(1, 2) * Fraction(2 * m + 2, 2 * m + 1) ** 2 * ratio


def per_sample_variance(entry, n):
    """Finite-``n`` variance ``4 pi * entry / n`` implied by a limiting law."""
    return 4.0 * math.pi * entry / n


@dataclass(frozen=True)
class AsymptoticReport:
    """Every asymptotic variance and inefficiency at one ``(nu, b0, theta0, delta)``."""

    nu: float
    b0: float
    theta0: float
    delta: float
    sigma1_sq: float
    sigma12: float
    sigma2_sq: float
    v1: float
    v12: float
    v2: float
    sigma3_sq: float
    v3: float
    var_theta_ml0: float
    var_theta_ge0: float
    sigma4_sq: float
    I0: float
    I1: float
    I2: float
    I3: float
    I4: float
    ineff_nu: float
    j_h0: float
    j_g_over_a2: float

    def to_dict(self):
        return asdict(self)


def asymptotic_report(params, tol=1e-9, rtol=1e-11, ctrl=DEFAULT_CONTROL, functionals=None):
    """Assemble an :class:`AsymptoticReport` for the true parameters ``params``."""
    sf = functionals or spectral_functionals(params, tol=tol, rtol=rtol, ctrl=ctrl)
    s1, s12, s2 = ml_asymptotic_cov(sf)
    v1, v12, v2 = gev_asymptotic_cov(sf)
    s3, v3 = microergodic_asymptotics(sf)
    var_ml0, var_ge0, i0, s4, i4 = fixed_parameter_asymptotics(sf)
    return AsymptoticReport(
        nu=params.nu,
        b0=params.b,
        theta0=params.theta,
        delta=params.delta,
        sigma1_sq=s1,
        sigma12=s12,
        sigma2_sq=s2,
        v1=v1,
        v12=v12,
        v2=v2,
        sigma3_sq=s3,
        v3=v3,
        var_theta_ml0=var_ml0,
        var_theta_ge0=var_ge0,
        sigma4_sq=s4,
        I0=i0,
        I1=v1 / s1,
        I2=v2 / s2,
        I3=v3 / s3,
        I4=i4,
        ineff_nu=ineff_closed_form(params.nu),
        j_h0=sf.j_h0,
        j_g_over_a2=sf.j_g_over_a2,
    )


TABLE_COLUMNS = ("nu", "delta", "I0", "I1", "I2", "I3", "I4", "ineff_limit")


def inefficiency_table(nu_list, delta_list, b0=1.0, theta0=1.0, **kwargs):
    """Rows of ``I0..I4`` and ``ineff(nu)`` over a grid; failures stay inline.

    A failed cell holds NaN ratios and the error message under ``"error"``
    (empty string otherwise).
    """
    rows = []
    for nu in nu_list:
        limit = ineff_closed_form(nu)
        for delta in delta_list:
            row = {"nu": float(nu), "delta": float(delta), "ineff_limit": limit, "error": ""}
            try:
                rep = asymptotic_report(ModelParams(nu, b0, theta0, delta), **kwargs)
            except CGEMError as exc:
                row.update({k: math.nan for k in ("I0", "I1", "I2", "I3", "I4")})
                row["error"] = f"{type(exc).__name__}: {exc}"
            else:
                row.update(I0=rep.I0, I1=rep.I1, I2=rep.I2, I3=rep.I3, I4=rep.I4)
            rows.append(row)
    return rows
