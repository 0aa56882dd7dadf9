"""Exception types raised across the package."""


class FFUError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(FFUError, ValueError):
    pass


class NotPositiveDefinite(FFUError, ValueError):
    pass


class NotInRowSpace(FFUError, ValueError):
    pass


class NonPositiveTarget(FFUError, ValueError):
    pass


class DomainError(FFUError, ValueError):
    """Parameters fall outside the hypotheses of a closed-form solution."""


class OutOfRange(FFUError, ValueError):
    pass


class SizeLimit(FFUError, ValueError):
    pass


class NoStep(FFUError, RuntimeError):
    """Backtracking exhausted every trial step without acceptance."""


class NotDescent(FFUError, ValueError):
    pass


class SingularInit(FFUError, ValueError):
    pass


class ParseError(FFUError, ValueError):
    pass


class NegativeCount(FFUError, ValueError):
    pass
