"""Exception hierarchy shared by the library, the service, and the CLI.

Each class carries the process exit code the CLI maps it to:
2 for configuration/parameter problems, 3 for bad or mismatched data,
4 for numerical failures.
"""


class DsukitError(Exception):
    exit_code = 1


class ConfigError(DsukitError):
    """Invalid parameter, option, or configuration value."""

    exit_code = 2


class DataError(DsukitError):
    """Malformed file, inconsistent manifest, or dimension mismatch."""

    exit_code = 3


class NumericalError(DsukitError):
    """Singular system or other numerical breakdown."""

    exit_code = 4
