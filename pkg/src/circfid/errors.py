"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CircfidError(Exception):
    exit_code = 1


class ConfigError(CircfidError, ValueError):
    exit_code = 2


class InputFormatError(CircfidError, ValueError):
    exit_code = 3


class CircuitSyntaxError(InputFormatError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class UnpricedGateError(InputFormatError):
    """A gate or edge has no entry in a noise model or error map."""


class NumericalError(CircfidError, ArithmeticError):
    exit_code = 4


class UndefinedFidelityError(NumericalError):
    """d-R² is undefined because the ideal distribution is uniform (SST = 0)."""


class CheckpointError(InputFormatError):
    pass
