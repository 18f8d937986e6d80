"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: data/request validation problems exit
with 2, numeric failures (non-convergence, degenerate inputs discovered
mid-computation) with 3, and I/O problems with 4.
"""


class SepEffectsError(Exception):
    """Base class for all errors raised by this package."""


class DataValidationError(SepEffectsError, ValueError):
    """Input data or request violates a documented contract."""


class ModelFitError(SepEffectsError, RuntimeError):
    """A model fit could not be completed."""


class ConvergenceError(ModelFitError):
    """Optimizer did not reach the gradient tolerance within max_iter."""


class SeparationError(ModelFitError):
    """Complete separation detected: coefficients diverging while the
    likelihood still improves."""


class MonotoneLikelihoodError(ModelFitError):
    """Cox partial likelihood is monotone in some direction (risk-set
    separation); no finite maximizer exists."""


class RankDeficientDesignError(ModelFitError):
    """Design matrix is rank deficient / collinear."""


class DegenerateMediatorError(ModelFitError):
    """A mediator is constant within its fitting subsample."""


class EstimationError(SepEffectsError, RuntimeError):
    """A plug-in estimate could not be computed from the fitted models."""


class UnidentifiedContrastError(DataValidationError):
    """Requested counterfactual contrast is not identified: the mediator
    law under exposure puts mass on configurations never observed without
    exposure, so the outcome conditional is undefined there."""


class EnumerationCapError(DataValidationError):
    """Mediator enumeration would exceed the supported dimension cap."""


class InternalCheckError(SepEffectsError, RuntimeError):
    """A self-consistency identity failed; indicates an implementation bug,
    not a property of the data."""


class BootstrapInstabilityError(SepEffectsError, RuntimeError):
    """Too many bootstrap replicates failed to converge."""


class AssignmentError(SepEffectsError, RuntimeError):
    """Pseudo-month assignment is infeasible for the given eligibility."""
