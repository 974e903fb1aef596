"""Exception taxonomy; the CLI maps these onto exit codes."""


class SourceTraceError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SourceTraceError):
    """Invalid configuration or command usage (CLI exit code 1)."""


class DataError(SourceTraceError):
    """Malformed or inconsistent data files (CLI exit code 1)."""


class NumericalError(SourceTraceError):
    """Numerical failure such as training divergence (CLI exit code 2)."""
