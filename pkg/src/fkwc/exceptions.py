"""Error taxonomy shared by the library and the CLI.

Three failure classes map to distinct CLI exit codes: bad input data,
bad parameters, and numerical breakdown.
"""


class FkwcError(Exception):
    """Base class for all errors raised by this package."""


class DataError(FkwcError):
    """Malformed or inconsistent input data (files, shapes, labels)."""


class ParameterError(FkwcError):
    """Invalid configuration or argument values."""


class NumericalError(FkwcError):
    """A numerical routine failed (e.g. factorization did not converge)."""


class InfeasibleError(ParameterError):
    """A requested target cannot be met under the given configuration."""
