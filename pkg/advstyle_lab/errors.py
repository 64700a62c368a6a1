"""Exception types raised across the laboratory."""


class AdvStyleLabError(Exception):
    """Base class for every error raised by advstyle_lab."""


class ShapeError(AdvStyleLabError, ValueError):
    """Operand shapes do not conform for the requested operation."""

    def __init__(self, op: str, left: tuple, right: tuple, detail: str = ""):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        message = f"{op}: incompatible shapes {self.left} and {self.right}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class DomainError(AdvStyleLabError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class AutodiffError(AdvStyleLabError, RuntimeError):
    """The computation tape cannot be differentiated as requested."""


class MissingGradientError(AdvStyleLabError, RuntimeError):
    """A trainable parameter reached the optimizer without a gradient."""


class ConfigError(AdvStyleLabError, ValueError):
    """A configuration value or path failed validation."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class TrainingDivergedError(AdvStyleLabError, RuntimeError):
    """The training loss became NaN or infinite."""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at step {step}")
