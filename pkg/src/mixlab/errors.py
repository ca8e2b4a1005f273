"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Malformed inputs: wrong shapes, dimensions, or parameter combinations."""


class DomainError(ValueError):
    """Arguments outside the mathematical domain of an operation."""


class DivergenceError(RuntimeError):
    """Numerical blow-up during SDE integration."""

    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


class ConfigError(ValueError):
    """Invalid, missing, or unknown experiment configuration."""
