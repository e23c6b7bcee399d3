"""Exception hierarchy shared by every stage of the pipeline."""


class IsingError(Exception):
    """Base class for all errors raised by territorial_ising."""


class DimensionMismatch(IsingError, ValueError):
    pass


class IndexOutOfRange(IsingError, IndexError):
    pass


class ConstantIndicator(IsingError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"indicator {column!r} has zero standard deviation")


class ZeroMean(IsingError, ValueError):
    def __init__(self, unit):
        self.unit = unit
        super().__init__(f"unit {unit!r} has a zero mean standardized profile")


class DegenerateInput(IsingError, ValueError):
    pass


class InvalidAttribute(IsingError, ValueError):
    def __init__(self, unit, field, value):
        self.unit = unit
        self.field = field
        super().__init__(f"unit {unit!r}: attribute {field}={value!r} is out of domain")


class TooLarge(IsingError, ValueError):
    def __init__(self, n, cap):
        self.n = n
        super().__init__(f"dense spectrum requested for n={n} > cap {cap}")


class NonPositiveTemperature(IsingError, ValueError):
    pass


class InvalidIteration(IsingError, ValueError):
    pass


class ZeroReferenceEnergy(IsingError, ZeroDivisionError):
    pass


class OutOfRange(IsingError, ValueError):
    pass


class EmptyInput(IsingError, ValueError):
    pass


class EmptyCalibration(IsingError, ValueError):
    pass


class ParseError(IsingError, ValueError):
    def __init__(self, row, column, message=""):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {message}".rstrip(": "))


class MissingColumn(IsingError, KeyError):
    def __str__(self):
        return f"missing column(s): {', '.join(map(str, self.args))}"


class InvalidClassLabel(IsingError, ValueError):
    pass


class DuplicateUnit(IsingError, ValueError):
    pass


class GeometryJoinError(IsingError, ValueError):
    def __init__(self, unmatched):
        self.unmatched = list(unmatched)
        super().__init__("units without geometry: " + ", ".join(map(str, self.unmatched)))


class ConfigError(IsingError, ValueError):
    pass


class StageError(IsingError, RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
