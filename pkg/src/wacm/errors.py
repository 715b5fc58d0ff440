"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: validation failures,
file-format/IO failures and numerical failures are kept apart.
"""


class ValidationError(ValueError):
    """Bad arguments or inputs that violate an operation's preconditions."""


class FormatError(ValidationError):
    """Malformed or unsupported file contents (magic, version, truncation)."""


class NumericalError(ArithmeticError):
    """Non-finite values where finite ones are required (e.g. diverged training)."""
