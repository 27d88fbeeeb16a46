"""Exception hierarchy shared by every mocklab module."""


class MockLabError(Exception):
    """Base class for all errors raised by mocklab."""


class ValidationError(MockLabError, ValueError):
    """An input object violates a structural invariant."""


class NotExpansive(ValidationError):
    pass


class Singular(ValidationError):
    pass


class SingularShift(ValidationError):
    pass


class CardinalityMismatch(ValidationError):
    pass


class NotHadamard(ValidationError):
    def __init__(self, defect: float, tolerance: float):
        self.defect = defect
        self.tolerance = tolerance
        super().__init__(
            f"unitarity defect {defect:.3e} exceeds tolerance {tolerance:.1e}"
        )


class DegenerateSpectrum(ValidationError):
    pass


class DimensionalityNote(ValidationError):
    """Raised where an argument needs R = R^t and the matrix is not symmetric."""


class ShiftPastEnd(MockLabError, IndexError):
    pass


class BudgetExceeded(MockLabError):
    def __init__(self, requested: int, budget: int, what: str = "nodes"):
        self.requested = requested
        self.budget = budget
        super().__init__(f"{requested} {what} requested, budget is {budget}")


class NumericError(MockLabError):
    """Base class for failures detected after computation started."""


class NonFinite(NumericError):
    def __init__(self, word: tuple[int, ...], value: complex):
        self.word = word
        self.value = value
        super().__init__(f"integrand is {value!r} at node word {word}")


class Unreliable(NumericError):
    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class MethodDisagreement(NumericError):
    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class ParseError(MockLabError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
