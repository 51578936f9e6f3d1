"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class HelixWavesError(Exception):
    exit_code = 1


class InputError(HelixWavesError, ValueError):
    """Bad input data or parameters (CLI exit 1)."""

    exit_code = 1


class SchemaError(InputError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing column {column!r}")


class RowError(InputError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ParameterError(InputError):
    pass


class NumericalError(HelixWavesError, ArithmeticError):
    """Numerical failure: divergence, blow-up, non-convergence (CLI exit 2)."""

    exit_code = 2


class DivergenceError(NumericalError):
    def __init__(self, message, step=None, time=None):
        self.step = step
        self.time = time
        super().__init__(message)


class BlowUpError(DivergenceError):
    pass


class FitError(NumericalError):
    pass


class ConvergenceError(FitError):
    def __init__(self, message, params=None, residual=None, iterations=None):
        self.params = params
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class UnresolvedTrainError(NumericalError):
    pass


class UsageError(HelixWavesError):
    exit_code = 64
