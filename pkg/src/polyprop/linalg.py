"""Complex state vectors, the Hermitian-operator contract, and small eigensolvers.

States are finite-dimensional complex amplitude vectors (hbar = 1 throughout).
Operators act on raw ``numpy.complex128`` arrays; complex128 stores each entry
as an interleaved (re, im) pair in one contiguous buffer, which is the layout
the matvec kernels want.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, OperatorContractError, UsageError

# Below this, a vector counts as numerically zero and cannot be normalized.
ZERO_NORM = 1e-300


def thread_cap() -> int:
    """Matvec parallelism cap: POLYPROP_THREADS if set, else machine parallelism."""
    env = os.environ.get("POLYPROP_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError as exc:
            raise UsageError(f"POLYPROP_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise UsageError(f"POLYPROP_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class StateVector:
    """Immutable complex amplitude vector over a finite Hilbert space."""

    amp: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.amp, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 1:
            raise UsageError(f"state must be a 1-d vector with dim >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise UsageError("state amplitudes must all be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "amp", arr)

    @property
    def dim(self) -> int:
        return self.amp.size

    def copy_amp(self) -> np.ndarray:
        """Writable copy of the amplitudes for caller-owned scratch."""
        return np.array(self.amp, dtype=np.complex128)


class HermitianOperator:
    """Abstract Hermitian action on amplitude arrays (energy units, hbar = 1).

    Subclasses set ``dim`` and implement ``apply``.  ``apply`` must be linear
    and Hermitian; `check_operator_contract` probes both on random vectors.
    Implementations may parallelize over index ranges internally, but the
    result must be deterministic: kernels here are pure gathers, so every
    output entry is an identical fixed-order sum regardless of partitioning.
    """

    dim: int

    def apply(self, amp: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def norm_bound(self):
        """Upper bound on max |eigenvalue|, or None if the model offers none."""
        return None


class DenseOperator(HermitianOperator):
    """Hermitian operator stored as an explicit dense matrix."""

    def __init__(self, matrix: np.ndarray):
        mat = np.asarray(matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise UsageError(f"matrix must be square, got shape {mat.shape}")
        herm_err = np.max(np.abs(mat - mat.conj().T))
        if herm_err > 1e-12 * max(1.0, float(np.max(np.abs(mat)))):
            raise OperatorContractError(f"matrix is not Hermitian (max deviation {herm_err:.3e})")
        self.matrix = mat
        self.dim = mat.shape[0]

    def apply(self, amp: np.ndarray) -> np.ndarray:
        return self.matrix @ amp


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if a.dim != b.dim:
        raise UsageError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amp, b.amp))


def norm(v: StateVector) -> float:
    return float(np.linalg.norm(v.amp))


def normalize(v: StateVector) -> StateVector:
    n = norm(v)
    if n < ZERO_NORM:
        raise UsageError("cannot normalize a numerically zero vector")
    return StateVector(v.amp / n)


def expectation(H: HermitianOperator, v: StateVector) -> float:
    """Re<v|H|v> for a normalized state; flags a non-Hermitian operator.

    The imaginary part of <v|H|v> must vanish for Hermitian H; anything above
    1e-10 * (1 + |Re|) is treated as a contract violation of the operator.
    """
    if H.dim != v.dim:
        raise UsageError(f"dimension mismatch: operator dim {H.dim}, state dim {v.dim}")
    val = complex(np.vdot(v.amp, H.apply(v.amp)))
    if abs(val.imag) > 1e-10 * (1.0 + abs(val.real)):
        raise OperatorContractError(
            f"<v|H|v> has imaginary part {val.imag:.3e}; operator is not Hermitian")
    return val.real


def check_operator_contract(H: HermitianOperator, n_vectors: int = 100, seed: int = 0,
                            rtol: float = 1e-12) -> None:
    """Probe linearity and Hermiticity of H.apply on random vectors.

    Raises OperatorContractError if either property fails beyond ``rtol``
    relative error on any of ``n_vectors`` random pairs.
    """
    rng = np.random.default_rng(seed)
    dim = H.dim
    for _ in range(n_vectors):
        x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        y = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        a, b = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
        hx, hy = H.apply(x), H.apply(y)
        scale = max(np.linalg.norm(hx), np.linalg.norm(hy), 1.0)
        lin_err = np.linalg.norm(H.apply(a * x + b * y) - (a * hx + b * hy))
        if lin_err > rtol * scale * (abs(a) + abs(b) + 1.0):
            raise OperatorContractError(f"apply is not linear (deviation {lin_err:.3e})")
        herm_err = abs(np.vdot(x, hy) - np.conj(np.vdot(y, hx)))
        if herm_err > rtol * scale * np.linalg.norm(x) * np.linalg.norm(y):
            raise OperatorContractError(f"apply is not Hermitian (deviation {herm_err:.3e})")


def jacobi_eigh(matrix: np.ndarray, max_sweeps: int = 30, off_tol: float = 1e-13):
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvector columns).  Sized for the small
    problems this package needs (4x4 density matrices, dense model matrices up
    to a few hundred); no external solver.  Convergence is declared when the
    off-diagonal Frobenius norm drops below ``off_tol`` relative to the matrix
    Frobenius norm; failure to get there within ``max_sweeps`` raises
    ConvergenceError.
    """
    a = np.array(matrix, dtype=np.complex128)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise UsageError(f"matrix must be square, got shape {a.shape}")
    v = np.eye(n, dtype=np.complex128)
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(n), v
    thresh = off_tol * scale

    def off_norm():
        off = a - np.diag(np.diag(a))
        return float(np.linalg.norm(off))

    for _ in range(max_sweeps):
        if off_norm() <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh / max(n, 1) * 1e-2:
                    continue
                app = a[p, p].real
                aqq = a[q, q].real
                # Complex rotation: phase strips arg(apq), then a real 2x2 rotation.
                phase = apq / abs(apq)
                tau = (aqq - app) / (2.0 * abs(apq))
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0.0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c * phase
                # Columns, then rows (conjugate transpose of the same rotation).
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - np.conj(s) * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = np.conj(s) * row_p + c * row_q
                vc_p = v[:, p].copy()
                vc_q = v[:, q].copy()
                v[:, p] = c * vc_p - np.conj(s) * vc_q
                v[:, q] = s * vc_p + c * vc_q
    else:
        raise ConvergenceError(
            f"jacobi_eigh: off-diagonal norm {off_norm():.3e} still above "
            f"{thresh:.3e} after {max_sweeps} sweeps")

    w = np.real(np.diag(a))
    order = np.argsort(w)
    return w[order], v[:, order]
