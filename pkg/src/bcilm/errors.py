"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/data problems exit
with 2, unsupported features with 3, anything else with 1.
"""


class BcilmError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BcilmError):
    """Invalid run configuration (bad field, missing prior, bad range)."""


class DataFormatError(BcilmError):
    """Malformed input file (CSV parse or validation failure)."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class UnsupportedFamilyError(BcilmError):
    """Requested operation does not support this alarm family."""


class InitializationError(BcilmError):
    """Sampler could not start (non-finite posterior at initial values)."""
