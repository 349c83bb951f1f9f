"""Exception types raised by aoimech."""


class AoiMechError(Exception):
    """Base class for all library errors."""


class DomainError(AoiMechError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(AoiMechError, ValueError):
    """Invalid configuration or parameter combination."""


class InfeasibleError(AoiMechError, ValueError):
    """Requested quantity is not attainable under the rate caps."""


class NumericalError(AoiMechError, ArithmeticError):
    """A numerical routine failed to converge.

    ``diagnostics`` carries whatever state helps to reproduce the failure.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class ResourceError(AoiMechError):
    """A requested table or grid would exceed the configured size limit."""
