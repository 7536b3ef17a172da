"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An input violates a documented precondition."""


class SpreadError(ValueError):
    """A no-spread-only operation was called with a nonzero rate spread."""


class NumericsError(ArithmeticError):
    """A numerical invariant failed (non-finite value, identity mismatch)."""


class TrainingDivergedError(NumericsError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite training loss at epoch {epoch}")


class GradientCheckError(NumericsError):
    """Analytic gradients disagree with finite differences."""


class MetricError(ValueError):
    """A metric could not be computed (e.g. every sample excluded)."""


class ConfigError(ValueError):
    """An experiment configuration file is invalid."""
