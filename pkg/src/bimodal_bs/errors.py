"""Exception hierarchy shared by all modules."""


class BbsError(Exception):
    """Base class for every error raised by :mod:`bimodal_bs`."""


class DomainError(BbsError, ValueError):
    """An argument lies outside the domain of the function."""


class BracketError(BbsError, ValueError):
    """The supplied interval does not bracket a sign change."""


class QuadratureError(BbsError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Attributes
    ----------
    estimate : float
        Best available estimate of the integral.
    error : float
        Error estimate attached to ``estimate``.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class OptimizationError(BbsError, ArithmeticError):
    """The minimizer could not find any finite objective value."""


class OverflowHazardError(BbsError, OverflowError):
    """The survival function underflowed so the hazard is not representable."""


class MomentError(BbsError, ArithmeticError):
    """Moment or entropy quadrature failed."""


class FitError(BbsError, RuntimeError):
    """Maximum-likelihood fitting failed.

    Attributes
    ----------
    diagnostics : dict
        Free-form details (optimizer messages, failing grid points, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class CiUnavailableError(BbsError, ArithmeticError):
    """A confidence interval could not be computed (singular information, ...)."""


class IngestionError(BbsError, ValueError):
    """A data file could not be parsed.

    Attributes
    ----------
    rejected : list of (int, str)
        ``(row_number, reason)`` pairs, row numbers counted from 1 after the header.
    """

    def __init__(self, message, rejected=None):
        super().__init__(message)
        self.rejected = list(rejected or [])


class ScenarioError(BbsError, ValueError):
    """A simulation scenario is malformed or cannot be realised."""
