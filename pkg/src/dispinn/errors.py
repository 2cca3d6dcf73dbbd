"""Exception and warning types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible or invalid dimensions."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class SingularMatrixError(ArithmeticError):
    """A pivot fell below the singularity threshold during factorization."""


class ConvergenceError(ArithmeticError):
    """An iterative routine exhausted its iteration budget."""


class InstabilityError(ArithmeticError):
    """A time march produced non-finite values."""


class JacobianError(ArithmeticError):
    """Finite-difference probing of a residual produced non-finite values."""


class OptimizerError(ArithmeticError):
    """The optimizer received non-finite gradients."""


class UndefinedMetricError(ArithmeticError):
    """A metric denominator is zero."""


class UsageError(RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""


class TrainingError(RuntimeError):
    """Training diverged; carries the epoch at which it happened."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class StaleJacobianWarning(RuntimeWarning):
    """The physics loss has been rising for many consecutive epochs."""


class StabilityWarning(RuntimeWarning):
    """A configuration violates an explicit stability bound."""
