"""scikit-learn style front end to the estimators.

A fitted estimator exposes ``b_``, ``theta_``, ``c_`` and the full
:class:`~cgemev.estimators.EstimateResult` as ``result_``.  ``predict``
returns the Wiener smoother ``A y`` of a series under the fitted model and
``score`` its mean log-likelihood per observation.

Examples
--------
>>> est = MaternNuggetEstimator(method="gev", nu=0.5, delta=0.01)
>>> est.fit(y).theta_                                   # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import estimators as E
from .spectral import ModelParams
from .toeplitz import apply_filter, build_kernel, log_likelihood
from .validation import check_model_inputs, check_positive, check_series

# CLI/user-facing names to internal method tags
METHOD_ALIASES = {
    "ev": "EV",
    "gev": "GEV",
    "ml": "ML",
    "ml0": "ML0",
    "ge0": "GE0",
    "mlc": "MLc",
    "hybrid": "H",
    "h": "H",
}


def method_tag(name):
    """Internal tag (``"GEV"``, ``"MLc"``, ...) for a case-insensitive method name."""
    try:
        return METHOD_ALIASES[str(name).lower()]
    except KeyError:
        raise ValueError(
            f"unknown method {name!r}; choose from {sorted(set(METHOD_ALIASES))}"
        ) from None


def run_method(tag, y, nu, delta, box, b0=None, c0=None, kernel_factory=None, seed=None, start=None):
    """Dispatch one estimator by tag; ``b0`` / ``c0`` only where the method needs them."""
    if tag == "EV":
        return E.ev_estimate(y, nu, seed=seed)
    if tag == "GEV":
        return E.cgemev_estimate(y, nu, delta, box, kernel_factory, seed)
    if tag == "ML":
        return E.ml_estimate(y, nu, delta, box, kernel_factory, seed, start=start)
    if tag == "H":
        return E.hybrid_estimate(y, nu, delta, box, kernel_factory, seed)
    if tag in ("ML0", "GE0"):
        if b0 is None:
            raise ValueError(f"method {tag} needs the known variance b0")
        fn = E.ml_fixed_b if tag == "ML0" else E.ge_fixed_b
        return fn(y, b0, nu, delta, box, kernel_factory, seed)
    if tag == "MLc":
        if c0 is None:
            raise ValueError("method MLc needs the known microergodic parameter c0")
        return E.ml_fixed_c(y, c0, nu, delta, box, kernel_factory, seed)
    raise ValueError(f"unknown method tag {tag!r}")


class MaternNuggetEstimator(BaseEstimator):
    """Fit ``(b, theta)`` of a Matérn signal observed in unit white noise.

    Parameters
    ----------
    method : str, default="gev"
        One of ``ev``, ``gev``, ``ml``, ``ml0``, ``ge0``, ``mlc``, ``hybrid``.
    nu : float, default=0.5
        Known regularity index, at least 1/2.
    delta : float, default=0.01
        Grid step of the series.
    b0 : float, optional
        Known variance, required by ``ml0`` and ``ge0``.
    c0 : float, optional
        Known microergodic parameter, required by ``mlc``.
    b_bounds, theta_bounds : tuple of float
        Search box.
    scan_points, grid_points : int
        Resolution of the coarse root scan and of the likelihood grid.
    """

    def __init__(
        self,
        method="gev",
        nu=0.5,
        delta=0.01,
        b0=None,
        c0=None,
        b_bounds=(1e-2, 1e2),
        theta_bounds=(1e-2, 1e2),
        scan_points=64,
        grid_points=16,
    ):
        self.method = method
        self.nu = nu
        self.delta = delta
        self.b0 = b0
        self.c0 = c0
        self.b_bounds = b_bounds
        self.theta_bounds = theta_bounds
        self.scan_points = scan_points
        self.grid_points = grid_points

    def _box(self):
        (b_lo, b_hi), (t_lo, t_hi) = self.b_bounds, self.theta_bounds
        return E.SearchBox(
            b_lo, b_hi, t_lo, t_hi, scan_points=self.scan_points, grid_points=self.grid_points
        )

    def fit(self, y, X=None):
        """Estimate the parameters from one series ``y``.

        ``X`` is ignored; it is accepted so the estimator slots into tooling
        that passes features and targets.
        """
        y = check_series(y)
        nu, delta = check_model_inputs(self.nu, self.delta)
        tag = method_tag(self.method)
        b0 = None if self.b0 is None else check_positive(self.b0, "b0")
        c0 = None if self.c0 is None else check_positive(self.c0, "c0")
        self.result_ = run_method(tag, y, nu, delta, self._box(), b0=b0, c0=c0)
        self.b_ = self.result_.b_hat
        self.theta_ = self.result_.theta_hat
        self.c_ = self.result_.c_hat
        self.n_observations_ = y.size
        return self

    def _fitted_kernel(self, n):
        check_is_fitted(self, "result_")
        if not (np.isfinite(self.b_) and self.b_ > 0 and np.isfinite(self.theta_)):
            raise ValueError(f"method {self.result_.method} did not produce a usable (b, theta)")
        nu, delta = check_model_inputs(self.nu, self.delta)
        return build_kernel(ModelParams(nu, self.b_, self.theta_, delta), n)

    def predict(self, y):
        """Wiener-smoothed signal ``A y`` under the fitted parameters."""
        y = check_series(y)
        kernel = self._fitted_kernel(y.size)
        return apply_filter(self.b_, kernel, y)

    def score(self, y, X=None):
        """Mean Gaussian log-likelihood per observation under the fitted model."""
        y = check_series(y)
        kernel = self._fitted_kernel(y.size)
        return log_likelihood(self.b_, kernel, y) / y.size
