"""Exception hierarchy shared by all modules."""


class FitsError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(FitsError, ValueError):
    """Shapes, orders or configuration values are inconsistent."""


class DomainError(FitsError, ValueError):
    """An argument lies outside the mathematical domain of a map."""


class NumericOverflowError(FitsError, ArithmeticError):
    """A simulated state became non-finite."""

    def __init__(self, message, neuron=None, step=None):
        super().__init__(message)
        self.neuron = neuron
        self.step = step


class NearPoleError(FitsError, ArithmeticError):
    """A transfer function was evaluated (numerically) on a pole."""


class RefineGridError(FitsError, ValueError):
    """Phase unwrapping is ambiguous on the supplied frequency grid."""


class SingularMixtureError(FitsError, ArithmeticError):
    """The single-stage mixture cancels exactly (zero magnitude)."""


class InternalConsistencyError(FitsError, RuntimeError):
    """A result that theory rules out was produced numerically."""


class RasterParseError(FitsError, ValueError):
    """A raster file is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DivergedTrainingError(FitsError, ArithmeticError):
    """The training loss became non-finite."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
