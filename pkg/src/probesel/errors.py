class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class IncompleteDataError(RuntimeError):
    """A required (function, instance, algorithm, run) cell is missing."""

    def __init__(self, message: str, missing=()):
        super().__init__(message)
        self.missing = list(missing)
