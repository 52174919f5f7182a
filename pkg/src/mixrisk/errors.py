"""Exception hierarchy shared by every mixrisk module."""


class MixriskError(Exception):
    """Base class for all mixrisk errors."""


class DomainError(MixriskError, ValueError):
    """An argument lies outside the domain of the function."""


class ConvergenceError(MixriskError, ArithmeticError):
    """A series, continued fraction, root finder or quadrature did not converge."""


class ValidationError(MixriskError, ValueError):
    """A model or portfolio violates one or more invariants.

    ``problems`` holds every violation found, not only the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnsupportedModelError(MixriskError, ValueError):
    """The requested calculation is not defined for this kind of model."""


class InfeasibleConfidenceError(MixriskError, ValueError):
    """No positive loss threshold exists for the requested tail probability."""


class InvalidCorrelationError(MixriskError, ValueError):
    """Aggregation inputs imply a correlation outside [-1, 1]."""


class TailSampleError(MixriskError, ValueError):
    """Too few Monte-Carlo draws fall in the tail to estimate it."""
