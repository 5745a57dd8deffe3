"""Exception hierarchy shared by every module of the package."""


class GWError(Exception):
    """Base class for all errors raised by gwbcm."""


class DataError(GWError):
    """Invalid user-supplied data (maps to CLI exit code 3)."""


class ValidationError(DataError):
    pass


class NonSquare(ValidationError):
    pass


class NonPositiveMass(ValidationError):
    pass


class MassSumMismatch(ValidationError):
    pass


class NonFiniteEntry(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class MarginalMismatch(ValidationError):
    pass


class Infeasible(ValidationError):
    pass


class EmptyVector(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class EmptySupport(DataError):
    pass


class BlowupTooLarge(DataError):
    pass


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class EmptyFile(ParseError):
    pass


class BadMassColumn(ParseError):
    pass


class AllPointsRemoved(DataError):
    pass


class NumericalError(GWError):
    """Numerical failure (maps to CLI exit code 4)."""


class NumericalUnderflow(NumericalError):
    pass


class NotConverged(NumericalError):
    """Raised only where a caller asks for a hard failure; solvers flag instead."""
