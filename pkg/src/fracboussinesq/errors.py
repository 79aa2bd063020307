"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An input violates a stated parameter range or exponent relation."""


class ConfigError(ValueError):
    """A configuration document is malformed; ``field`` names the offender."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class BlowUpError(RuntimeError):
    """Time marching left the admissible norm range."""
