"""Quartic double well in a truncated harmonic-oscillator basis.

H = p^2/2 - (omega^2/2) x^2 + lambda x^4, expressed through ladder operators
of a basis oscillator (frequency nu, defaulting to the well's omega):
x = sqrt(1/2 nu)(a+ + a), p = i sqrt(nu/2)(a+ - a).  The well minima sit at
+-x0 with x0 = omega / sqrt(4 lambda); initial states are basis eigenstates
displaced to the right minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConvergenceError, OracleError, PeriodNotFoundError,
                     TruncationError, UsageError)
from .linalg import DenseOperator, StateVector, jacobi_eigh
from .series import TimeSeries

MAX_BASIS = 4096
ORACLE_MAX_DIM = 512


@dataclass(frozen=True)
class DoubleWellParams:
    """Well frequency, quartic coupling, basis truncation, initial index."""

    omega: float
    lam: float
    n_basis: int = 50
    m: int = 0
    basis_omega: float | None = None  # expansion-basis frequency; None = omega

    def __post_init__(self):
        if not (self.omega > 0.0 and math.isfinite(self.omega)):
            raise UsageError(f"omega must be a positive real, got {self.omega}")
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise UsageError(f"lambda must be a positive real, got {self.lam}")
        if not (2 <= self.n_basis <= MAX_BASIS):
            raise UsageError(f"n_basis must be in [2, {MAX_BASIS}], got {self.n_basis}")
        if not (0 <= self.m < self.n_basis):
            raise UsageError(f"m must be in [0, n_basis), got {self.m}")
        if self.basis_omega is not None and not self.basis_omega > 0.0:
            raise UsageError(f"basis_omega must be positive, got {self.basis_omega}")

    @property
    def x0(self) -> float:
        return self.omega / math.sqrt(4.0 * self.lam)

    @property
    def nu(self) -> float:
        return self.omega if self.basis_omega is None else self.basis_omega


def ladder_matrix(n: int) -> np.ndarray:
    """Truncated annihilation operator: a[k-1, k] = sqrt(k)."""
    a = np.zeros((n, n))
    ks = np.arange(1, n)
    a[ks - 1, ks] = np.sqrt(ks)
    return a


def position_matrix(nu: float, n: int) -> np.ndarray:
    a = ladder_matrix(n)
    return math.sqrt(0.5 / nu) * (a + a.T)


def build_double_well_matrix(params: DoubleWellParams) -> DenseOperator:
    """Dense symmetric Hamiltonian from truncated ladder matrices.

    With nu = omega this is -omega/2 [(a+)^2 + a^2] + (lambda/4 omega^2)(a+ + a)^4.
    Truncating the ladder matrices before taking products corrupts only the
    last four rows/columns (the quartic reaches two rungs past the edge);
    everything above that block matches the untruncated matrix elements.
    """
    n = params.n_basis
    nu = params.nu
    a = ladder_matrix(n)
    q = a + a.T        # a+ + a
    d = a.T - a        # a+ - a
    q2 = q @ q
    h = (-0.25 * nu) * (d @ d) - (params.omega ** 2 / (4.0 * nu)) * q2 \
        + (params.lam / (4.0 * nu ** 2)) * (q2 @ q2)
    h = 0.5 * (h + h.T)
    return DenseOperator(h)


def _normalized_hermite_table(z: np.ndarray, n_max: int) -> np.ndarray:
    """h_n(z) = H_n(z)/sqrt(2^n n! sqrt(pi)) for n = 0..n_max-1, all nodes."""
    table = np.empty((n_max, z.size))
    table[0] = math.pi ** -0.25
    if n_max > 1:
        table[1] = math.sqrt(2.0) * z * table[0]
    for k in range(1, n_max - 1):
        table[k + 1] = (z * math.sqrt(2.0 / (k + 1)) * table[k]
                        - math.sqrt(k / (k + 1.0)) * table[k - 1])
    return table


def displaced_eigenstate_coeffs(params: DoubleWellParams):
    """Basis coefficients of the m-th oscillator eigenstate displaced to x0.

    Returns (state, leakage) where leakage = 1 - sum |c_n|^2 before
    renormalization.  For m = 0 in the matching basis the closed form
    c_n = exp(-a0^2/2) a0^n / sqrt(n!) with a0 = x0 sqrt(omega/2) applies;
    otherwise the overlaps come from Gauss-Hermite quadrature of order
    2*n_basis + 16, which integrates the polynomial part exactly.
    Leakage beyond 1e-6 raises TruncationError: the basis is too short.
    """
    n = params.n_basis
    x0 = params.x0
    nu = params.nu
    omega = params.omega
    if params.m == 0 and nu == omega:
        a0 = x0 * math.sqrt(0.5 * omega)
        c = np.empty(n)
        c[0] = math.exp(-0.5 * a0 * a0)
        for k in range(1, n):
            c[k] = c[k - 1] * a0 / math.sqrt(k)
    else:
        order = 2 * n + 16
        u, w = np.polynomial.hermite.hermgauss(order)
        sig = nu + omega
        mu = omega * x0 / sig
        x = mu + u * math.sqrt(2.0 / sig)
        basis_part = _normalized_hermite_table(math.sqrt(nu) * x, n)
        packet_part = _normalized_hermite_table(math.sqrt(omega) * (x - x0), params.m + 1)[params.m]
        const = (math.sqrt(2.0 / sig) * (nu * omega) ** 0.25
                 * math.exp(-0.5 * nu * omega * x0 * x0 / sig))
        c = const * (basis_part * packet_part) @ w
    weight = float(np.sum(c * c))
    leakage = 1.0 - weight
    if leakage > 1e-6:
        raise TruncationError(
            f"displaced state leaks {leakage:.3e} outside the n_basis={n} basis; "
            f"increase n_basis", leakage=leakage)
    return StateVector(c / math.sqrt(weight)), leakage


def position_observables(psi: StateVector, omega: float, n_basis: int | None = None):
    """(<x>, sigma) with x = sqrt(1/2 omega)(a+ + a) in the expansion basis.

    sigma is computed as ||(x - <x>) psi||, which is nonnegative by
    construction and free of the <x^2> - <x>^2 cancellation.
    """
    if n_basis is None:
        n_basis = psi.dim
    if n_basis != psi.dim:
        raise UsageError(f"n_basis {n_basis} does not match state dim {psi.dim}")
    x = position_matrix(omega, n_basis)
    y = x @ psi.amp
    x_mean = float(np.real(np.vdot(psi.amp, y)))
    sigma = float(np.linalg.norm(y - x_mean * psi.amp))
    return x_mean, sigma


def bender_case(beta: float):
    """Parameters mapping the well onto H = p^2/2 + 4 q^2 (q-beta)^2 / beta^2.

    Completing the square with q = x + beta/2 gives (4/beta^2) x^4 - 2 x^2
    + beta^2/4, so lambda = 4/beta^2 and the x^2 coefficient forces omega = 2;
    the constant beta^2/4 is a global phase and is dropped.  Returns
    (params, shift) with shift = beta/2, so reported <q> = <x> + shift.
    """
    if not (beta > 0.0 and math.isfinite(beta)):
        raise UsageError(f"beta must be a positive real, got {beta}")
    params = DoubleWellParams(omega=2.0, lam=4.0 / beta ** 2, n_basis=32, m=0)
    return params, beta / 2.0


class ExactPropagator:
    """exp(-iHt) through a full eigendecomposition, reusable across times."""

    def __init__(self, Hd: DenseOperator):
        if Hd.dim > ORACLE_MAX_DIM:
            raise UsageError(f"oracle limited to dim <= {ORACLE_MAX_DIM}, got {Hd.dim}")
        try:
            self.w, self.v = jacobi_eigh(Hd.matrix)
        except ConvergenceError as exc:
            raise OracleError(f"eigendecomposition failed: {exc}") from exc

    def at(self, psi0: StateVector, t: float) -> StateVector:
        coef = self.v.conj().T @ psi0.amp
        return StateVector(self.v @ (np.exp(-1.0j * self.w * t) * coef))


def exact_diag_oracle(Hd: DenseOperator, psi0: StateVector, t: float) -> StateVector:
    """psi(t) = V exp(-i w t) V^dag psi0 from cyclic-Jacobi diagonalization."""
    return ExactPropagator(Hd).at(psi0, t)


def estimate_period(series: TimeSeries, field: str) -> float:
    """Dominant oscillation period of one series column.

    Takes the peak of the zero-padded DFT magnitude of the mean-subtracted
    signal, refined by quadratic interpolation around the peak bin.  Raises
    PeriodNotFoundError when no bin stands at least 5x above the spectral
    noise floor (the median magnitude), as happens for signals with no
    well-defined period.
    """
    t = series.column("t")
    y = series.column(field)
    if t.size < 8:
        raise UsageError(f"need at least 8 samples to estimate a period, got {t.size}")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise UsageError("period estimation needs uniform time sampling")
    dt = float(dts[0])
    y = y - np.mean(y)
    nfft = 1 << max(int(np.ceil(np.log2(4 * y.size))), 3)
    mag = np.abs(np.fft.rfft(y, n=nfft))
    mag[0] = 0.0
    peak = int(np.argmax(mag[1:])) + 1
    floor = float(np.median(mag[1:]))
    if not (mag[peak] > 5.0 * floor and mag[peak] > 0.0):
        raise PeriodNotFoundError(
            f"no dominant peak in {field!r}: max magnitude {mag[peak]:.3e} "
            f"vs noise floor {floor:.3e}")
    if 1 <= peak < mag.size - 1:
        m1, m0, p1 = mag[peak - 1], mag[peak], mag[peak + 1]
        denom = m1 - 2.0 * m0 + p1
        delta = 0.5 * (m1 - p1) / denom if denom != 0.0 else 0.0
    else:
        delta = 0.0
    freq = (peak + delta) / (nfft * dt)
    return 1.0 / freq
