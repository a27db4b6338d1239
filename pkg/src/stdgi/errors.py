"""Exception hierarchy shared by every stage of the pipeline."""


class StdgiError(Exception):
    """Base class for all package errors."""


class DimensionError(StdgiError, ValueError):
    pass


class ConfigError(StdgiError, ValueError):
    pass


class ValidationError(StdgiError, ValueError):
    pass


class ParseError(StdgiError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IngestionError(StdgiError, ValueError):
    pass


class NormalizationError(StdgiError, ValueError):
    pass


class TapeError(StdgiError, RuntimeError):
    """Raised on misuse of the autodiff tape (double backward, non-scalar loss)."""


class MetricError(StdgiError, ValueError):
    pass


class ComparisonError(StdgiError, ValueError):
    pass


class DivergenceError(StdgiError, FloatingPointError):
    pass
