"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input is outside the mathematical domain of an operation
    (e.g. an unstable queue, a non-positive headway)."""


class ConfigurationError(ValueError):
    """A scenario or instance is structurally invalid and cannot be run."""


class ScenarioValidationError(ConfigurationError):
    """A scenario document failed validation; carries the path of the
    offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class MetricsError(RuntimeError):
    """Not enough simulated data to compute a requested metric."""
