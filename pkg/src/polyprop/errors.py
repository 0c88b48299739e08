"""Exception types shared across the package."""


class PolypropError(Exception):
    """Base class for all errors raised by polyprop."""


class UsageError(PolypropError, ValueError):
    """Invalid arguments: dimension mismatch, bad parameter values, degenerate input."""


class OperatorContractError(PolypropError):
    """An operator violated the Hermitian/linearity contract."""


class ConvergenceError(PolypropError):
    """A series or iteration failed to converge.

    Attributes carry diagnostics when available: ``required_k`` (terms the
    series would need), ``suggested_dt`` (advisor hint), ``step_index``
    (which evolve step failed), ``s_magnitude`` (Laguerre expansion ratio).
    """

    def __init__(self, message, *, required_k=None, suggested_dt=None,
                 step_index=None, s_magnitude=None):
        super().__init__(message)
        self.required_k = required_k
        self.suggested_dt = suggested_dt
        self.step_index = step_index
        self.s_magnitude = s_magnitude


class EstimationError(PolypropError):
    """Spectral-bound estimation failed to converge."""


class TruncationError(PolypropError):
    """Basis truncation leaks too much weight; carries the measured leakage."""

    def __init__(self, message, *, leakage=None):
        super().__init__(message)
        self.leakage = leakage


class ConfigError(PolypropError):
    """Bad run configuration; names the offending key and line when known."""

    def __init__(self, message, *, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class PeriodNotFoundError(PolypropError):
    """No dominant spectral peak stands above the noise floor."""


class OracleError(PolypropError):
    """The exact-diagonalization oracle failed (eigensolver did not converge)."""


class DensityMatrixError(PolypropError):
    """A matrix claimed to be a density matrix violates its invariants."""
