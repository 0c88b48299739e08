"""Polynomial-expansion propagators for quantum time evolution."""

from .errors import (ConfigError, ConvergenceError, DensityMatrixError,
                     EstimationError, OperatorContractError, OracleError,
                     PeriodNotFoundError, PolypropError, TruncationError,
                     UsageError)
from .linalg import (DenseOperator, HermitianOperator, StateVector,
                     check_operator_contract, expectation, inner_product,
                     jacobi_eigh, norm, normalize, thread_cap)
from .propagators import (Abm4History, PropagatorConfig, StepReport,
                          abm4_bootstrap, abm4_step, bessel_j_sequence,
                          chebyshev_step, estimate_spectral_bound, evolve,
                          hermite_scalar, hermite_step, laguerre_scalar,
                          laguerre_step, rk4_step, suggest_dt_hermite,
                          suggest_dt_laguerre)
from .series import TimeSeries

__version__ = "0.1.0"

from . import double_well, harness, linalg, propagators, series, spin_bath  # noqa: E402
