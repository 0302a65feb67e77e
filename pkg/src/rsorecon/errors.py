"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class PropagationError(RuntimeError):
    """Numeric propagation produced a non-finite state."""


class ConfigError(ValueError):
    """A configuration value is missing or malformed."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class ParseError(ValueError):
    """A mesh or image file could not be parsed."""


class RankError(ValueError):
    """Correspondences are degenerate (collinear or coincident)."""


class GeometryError(ValueError):
    """Degenerate geometric configuration."""
