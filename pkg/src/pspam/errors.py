"""Exception hierarchy shared across the package."""


class PspamError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(PspamError, ValueError):
    pass


class DomainError(PspamError, ValueError):
    pass


class NumericalError(PspamError, ArithmeticError):
    pass


class FramingError(PspamError, ValueError):
    pass


class ConfigError(PspamError, ValueError):
    """Bad or inconsistent configuration (maps to CLI exit code 1)."""


class UnitError(PspamError, TypeError):
    """A waveform was handed to a stage expecting a different unit."""


class ContractError(PspamError, ValueError):
    pass


class SingularSystemError(PspamError, ArithmeticError):
    pass


class ShapeError(PspamError, ValueError):
    pass


class BoundaryError(PspamError, IndexError):
    pass


class StageError(PspamError, RuntimeError):
    """Wraps a failure inside one stage of a trial, naming the stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause
