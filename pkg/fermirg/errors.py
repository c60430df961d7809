"""Exception hierarchy shared by every fermirg module."""


class FermiRGError(Exception):
    """Base class for all errors raised by fermirg."""


class UsageError(FermiRGError, ValueError):
    """Operands that cannot be combined: mismatched domains, bad slots, arity overflow."""


class DomainError(FermiRGError, ValueError):
    """Argument outside the domain of a function (e.g. 1/(a - X) with a <= X_0)."""


class NumericError(FermiRGError, RuntimeError):
    """Quadrature or fit failure. ``diagnostics`` carries whatever the solver reported."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(FermiRGError):
    """Schema violation in a configuration document; ``path`` is the dotted field path."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
