"""Exception taxonomy shared by all modules.

Exit-code mapping used by the CLI: ConfigurationError -> 2,
NumericFailure -> 3, OSError -> 4.
"""


class ConfigurationError(ValueError):
    """Invalid configuration or data that fails a validation rule."""


class CompatibilityError(ConfigurationError):
    """Initial data / source band not compatible with the potential domain."""


class NumericFailure(RuntimeError):
    """An iterative solver failed to converge."""


class StepFailure(NumericFailure):
    """A single time step could not be completed."""


class RunFailure(NumericFailure):
    """A simulation aborted; carries the partial trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory if trajectory is not None else []


class MeanDomainError(ValueError):
    """Operand has nonzero mean where a zero-mean element is required."""
