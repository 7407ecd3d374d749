"""Exception hierarchy."""

__all__ = [
    "NCIndexError",
    "ParityError",
    "NotHermitianError",
    "NotUnitaryError",
    "NotIdempotentError",
    "KernelError",
    "GradingError",
    "NumericalQualityError",
    "CutoffError",
    "RefinementError",
    "ResidueFitError",
    "CalibrationError",
    "ChecksumError",
    "ConfigError",
    "UnreliableResultWarning",
]


class NCIndexError(Exception):
    """Base class for all errors raised by ncindex."""


class ParityError(NCIndexError, ValueError):
    pass


class GradingError(NCIndexError, ValueError):
    pass


class NotHermitianError(NCIndexError, ValueError):
    def __init__(self, asymmetry, tol):
        super().__init__(f"matrix is not Hermitian: max |M - M*| = {asymmetry:.3e} > {tol:.1e}")
        self.asymmetry = asymmetry


class NotUnitaryError(NCIndexError, ValueError):
    def __init__(self, defect, tol):
        super().__init__(f"operator is not unitary: max |g*g - 1| = {defect:.3e} > {tol:.1e}")
        self.defect = defect


class NotIdempotentError(NCIndexError, ValueError):
    def __init__(self, defect, tol, what="e^2 - e"):
        super().__init__(f"not idempotent: max |{what}| = {defect:.3e} > {tol:.1e}")
        self.defect = defect


class KernelError(NCIndexError, ValueError):
    """Raised when an operator has a kernel the caller asked us to reject."""

    def __init__(self, message, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


class NumericalQualityError(NCIndexError):
    """A computation ran but its diagnostics say the result cannot be trusted."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CutoffError(NumericalQualityError, ValueError):
    pass


class RefinementError(NumericalQualityError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ResidueFitError(NumericalQualityError):
    pass


class CalibrationError(NCIndexError):
    pass


class ChecksumError(CalibrationError):
    pass


class ConfigError(NCIndexError, ValueError):
    pass


class UnreliableResultWarning(UserWarning):
    """A result was produced but its integrality defect is too large to trust."""
