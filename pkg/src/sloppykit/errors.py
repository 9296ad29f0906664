"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`SloppyError`,
so callers (and the CLI) can tell domain failures apart from programming
errors.
"""


class SloppyError(Exception):
    """Base class for all library errors."""


class ModelDomainError(SloppyError, ValueError):
    """A parameter lies where the model cannot be evaluated."""


class OutOfDomain(ModelDomainError):
    pass


class NonFinite(ModelDomainError):
    pass


class Degenerate(ModelDomainError):
    pass


class NotHurwitz(ModelDomainError):
    pass


class ZeroProbabilityCell(ModelDomainError):
    pass


class MissingAnalyticJacobian(SloppyError):
    pass


class DuplicateTimepoints(SloppyError, ValueError):
    pass


class DimensionMismatch(SloppyError, ValueError):
    pass


class NotSquare(SloppyError, ValueError):
    pass


class NotPositiveDefinite(SloppyError, ValueError):
    pass


class SingularSystem(SloppyError):
    pass


class StepSizeUnderflow(SloppyError):
    pass


class NonFiniteState(SloppyError):
    pass


class InvalidTrialCount(SloppyError, ValueError):
    pass


class WrongKernelDimension(SloppyError):
    pass


class CorrectorDivergence(SloppyError):
    pass


class MleFailure(SloppyError):
    pass
