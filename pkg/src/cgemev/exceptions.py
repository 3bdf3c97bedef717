"""Exception hierarchy shared by every module of the package."""


class CGEMError(Exception):
    """Base class for all errors raised by cgemev."""


class TruncationBudgetExceeded(CGEMError):
    """The aliasing sum needs more than ``k_max`` terms to meet its tolerance."""


class QuadratureFailure(CGEMError):
    """An adaptive integral ran out of panels before reaching its tolerance."""


class DegenerateWeightedMean(CGEMError):
    """The weighted mean in a coefficient of variation is numerically zero."""


class DegenerateInformation(CGEMError):
    """An asymptotic covariance formula divides by a vanishing quantity."""


class NotPositiveDefinite(CGEMError):
    """A covariance matrix failed to factorize."""


class EmbeddingNotPD(CGEMError):
    """Circulant embedding has eigenvalues below the clipping floor."""


class DenseTooLarge(CGEMError):
    """Dense Cholesky sampling was requested above the size cap."""


class EVNegative(CGEMError):
    """The empirical-variance estimate is not positive."""


class NoSignChange(CGEMError):
    """The estimating function keeps one sign on the whole search interval."""


class OptimizerStalled(CGEMError):
    """A likelihood maximization did not converge."""


class ReparamOutOfBox(CGEMError):
    """A reparameterized value left the search box."""


class MismatchedConfig(CGEMError):
    """Empirical and predicted reports refer to different model settings."""


class ExclusionRateExceeded(CGEMError):
    """Too many Monte Carlo replicates failed for an estimator to summarize the run."""
