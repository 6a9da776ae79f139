"""Exception types shared across the package."""


class AoicoopError(Exception):
    """Base class for package-specific errors."""


class ConfigError(AoicoopError):
    """A configuration value or combination of values is unusable."""


class ConfigValidationError(ConfigError):
    """Config-file validation failed; carries every error found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class TraceFormatError(AoicoopError, ValueError):
    """A trace or sample file does not parse; message names the line."""
