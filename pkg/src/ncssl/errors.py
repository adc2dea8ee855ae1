"""Exception hierarchy shared by every ncssl module."""


class NcsslError(Exception):
    """Base class for all errors raised by ncssl."""


class DimensionError(NcsslError, ValueError):
    pass


class ValidationError(NcsslError, ValueError):
    pass


class DomainError(NcsslError, ValueError):
    pass


class ConvergenceError(NcsslError, ArithmeticError):
    """Eigensolver did not reach its off-diagonal threshold."""

    def __init__(self, message, residual, sweeps):
        super().__init__(f"{message} (off-diagonal residual {residual:.3e} after {sweeps} sweeps)")
        self.residual = residual
        self.sweeps = sweeps


class SingularityError(NcsslError, ArithmeticError):
    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class DivergenceError(NcsslError, ArithmeticError):
    """Raised when an integration leaves the finite, bounded regime."""

    def __init__(self, message, step=None, t=None):
        where = "" if step is None else f" at step {step} (t={t:.6g})"
        super().__init__(message + where)
        self.step = step
        self.t = t


class UnsupportedVariantError(NcsslError, ValueError):
    pass


class NonUniqueFixedPointError(NcsslError, ValueError):
    pass


class ConfigError(NcsslError, ValueError):
    """Bad run configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
