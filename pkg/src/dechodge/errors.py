"""Exception hierarchy shared by every module."""


class DecError(Exception):
    """Base class for all errors raised by the package."""


class ParseError(DecError):
    pass


class NonManifold(DecError):
    pass


class NonOrientable(DecError):
    pass


class BadParams(DecError):
    pass


class StarFailure(DecError):
    """A generated mesh has a nonpositive circumcentric dual volume."""


class DegreeOutOfRange(DecError):
    pass


class DegreeMismatch(DecError):
    pass


class NegativeDualVolume(DecError):
    pass


class EvalError(DecError):
    pass


class AmbiguousRank(DecError):
    """Singular-value gap too small to decide a rank confidently."""

    def __init__(self, message, decision=None):
        super().__init__(message)
        self.decision = decision


class Inconsistent(DecError):
    """Right-hand side is outside the numerical range of the operator."""


class BettiMismatch(DecError):
    pass


class ResolutionTooCoarse(DecError):
    pass


class BoundaryRequired(DecError):
    """Operation needs a complex with non-empty boundary."""


class NotExact(DecError):
    pass


class NotHarmonic(DecError):
    pass
