"""Exception hierarchy shared by every module of the package."""


class CollotError(Exception):
    """Base class for all library errors."""


class ValidationError(CollotError, ValueError):
    """Input data violates a structural precondition."""


class MismatchedCounts(ValidationError):
    pass


class MismatchedDims(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class SamePosition(ValidationError):
    pass


class TooFewPoints(ValidationError):
    pass


class TooLarge(CollotError):
    """A size guard on a dense or exhaustive method was exceeded."""


class NumericalUnderflow(CollotError, ArithmeticError):
    pass


class ParseError(ValidationError):
    pass


class RaggedRows(ValidationError):
    pass


class EmptyFile(ValidationError):
    pass


class UnknownFamily(ValidationError):
    pass


class ZeroMassImage(ValidationError):
    pass


class BadMagic(ValidationError):
    pass


class TruncatedData(ValidationError):
    pass


class DegenerateTrace(ValidationError):
    pass
