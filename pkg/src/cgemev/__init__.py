"""Range and variance estimation for Matérn time series observed in white noise.

The package compares the CGEM-EV estimating scheme (empirical variance plus
a conditional Gibbs-energy-mean equation for the range) with exact maximum
likelihood, both on simulated data and through their asymptotic variances.
"""

from .api import MaternNuggetEstimator
from .estimators import (
    EstimateResult,
    SearchBox,
    cgemev_estimate,
    ev_estimate,
    ev_variance,
    ge_fixed_b,
    hybrid_estimate,
    microergodic,
    ml_estimate,
    ml_fixed_b,
    ml_fixed_c,
    nugget_variance_estimate,
    solve_cgem,
)
from .exceptions import *  # noqa: F401,F403
from .harness import ExperimentConfig, ExperimentSummary, compare_report, run_experiment
from .quadrature import (
    AsymptoticReport,
    SpectralFunctionals,
    asymptotic_report,
    ineff_closed_form,
    ineff_fraction,
    inefficiency_table,
    integrate_spectral,
    psi,
    psi_small_delta,
    spectral_functionals,
    weighted_cv,
)
from .simulation import ObservationSeries, SimulationSpec, simulate_observations, simulate_signal
from .spectral import (
    AliasingControl,
    ModelParams,
    covariance,
    log_density_derivative_aliased,
    log_density_derivative_unaliased,
    matern_constant,
    spectral_density_aliased,
    spectral_density_unaliased,
    wiener_filter,
)
from .toeplitz import (
    apply_filter,
    build_kernel,
    cgem_statistic,
    gibbs_energy,
    log_likelihood,
    trace_filter,
)

__version__ = "0.1.0"
