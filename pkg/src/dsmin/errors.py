"""Exception types raised across the package."""


class DsminError(Exception):
    """Base class for all package errors."""


class DomainError(DsminError, ValueError):
    """A value lies outside the domain an operation is defined on."""


class InvariantError(DsminError, ValueError):
    """A structural invariant (e.g. row monotonicity) is violated."""


class ArgumentError(DsminError, ValueError):
    """An argument is inconsistent with the operation's preconditions."""


class NumericError(DsminError, ArithmeticError):
    """An oracle or iterate produced a non-finite value."""


class RefusalError(DsminError, RuntimeError):
    """An exhaustive computation would exceed its configured budget."""


class UnsupportedDomainError(DomainError):
    """The domain cannot be reduced to a finite lattice."""


class ParseError(DsminError, ValueError):
    """A problem or instance file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
