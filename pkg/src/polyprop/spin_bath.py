"""Two central spins Heisenberg-coupled to a bath of non-interacting spins.

H = 2J s1.s2 + sum_k A_k (s1 + s2).I_k on a 2^(N+2)-dimensional space.

Basis index bit layout: (s1 s2 I_1 ... I_N) with s1 the most significant bit
and bit value 1 meaning spin up.  The four system configurations are indexed
by a = 2*s1 + s2, so a = 0 is down-down, a = 1 is down-up, a = 2 is up-down,
a = 3 is up-up; the full index is a * 2^N + e with e the bath configuration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DensityMatrixError, UsageError
from .linalg import HermitianOperator, StateVector, jacobi_eigh, thread_cap

MAX_BATH_SPINS = 24

# Threading kicks in only when a single kernel pass is large enough to
# amortize dispatch; below this the strided single-thread kernel wins.
_THREAD_DIM = 1 << 18


@dataclass(frozen=True)
class SpinBathParams:
    """Exchange J, bath size N, couplings A (length N), RNG seed."""

    J: float
    N: int
    A: np.ndarray = field(default=None)
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.N <= MAX_BATH_SPINS):
            raise UsageError(f"N must be in [0, {MAX_BATH_SPINS}], got {self.N}")
        a = np.zeros(0) if self.A is None else np.asarray(self.A, dtype=float)
        if a.shape != (self.N,):
            raise UsageError(f"A must hold exactly N={self.N} couplings, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise UsageError("couplings must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "A", a)

    @property
    def dim(self) -> int:
        return 1 << (self.N + 2)


def sample_couplings(N: int, A_max: float, seed: int) -> np.ndarray:
    """N i.i.d. couplings uniform on [0, A_max], reproducible per seed."""
    if N < 0:
        raise UsageError(f"N must be >= 0, got {N}")
    if not A_max > 0.0:
        raise UsageError(f"A_max must be positive, got {A_max}")
    rng = np.random.default_rng([int(seed), 0])
    return rng.uniform(0.0, A_max, size=N)


class SpinBathOperator(HermitianOperator):
    """Matrix-free action of the spin-bath Hamiltonian.

    Every Heisenberg pair c * s.s' contributes c * (flip-flop/2 + sz sz').
    The diagonal sz sz' part is presummed into one vector; each flip-flop
    acts on the state viewed as a rank-(N+2) tensor of two-level axes, where
    exchanging the two bit values is a pair of strided slice adds.  All
    kernels are pure gathers from the input, so outputs are deterministic
    under any partitioning of the index space.
    """

    def __init__(self, params: SpinBathParams):
        self.params = params
        n_bits = params.N + 2
        self.dim = params.dim
        self._shape = (2,) * n_bits
        # (bit_a, bit_b, coupling): central pair at 2J, bath pairs at A_k for
        # both central spins.  I_k sits at bit position N - k (k = 1..N).
        pairs = [(n_bits - 1, n_bits - 2, 2.0 * params.J)]
        for k in range(params.N):
            bath_bit = params.N - 1 - k
            pairs.append((n_bits - 1, bath_bit, float(params.A[k])))
            pairs.append((n_bits - 2, bath_bit, float(params.A[k])))
        self._pairs = pairs

        idx = np.arange(self.dim)
        diag = np.zeros(self.dim)
        flips = []
        for pa, pb, c in pairs:
            same = ((idx >> pa) & 1) == ((idx >> pb) & 1)
            diag += np.where(same, 0.25 * c, -0.25 * c)
            # bit position -> tensor axis (most significant bit is axis 0)
            ax_a, ax_b = n_bits - 1 - pa, n_bits - 1 - pb
            up_down = self._slicer(n_bits, ax_a, 1, ax_b, 0)
            down_up = self._slicer(n_bits, ax_a, 0, ax_b, 1)
            flips.append((up_down, down_up, 0.5 * c))
        self._diag = diag
        self._flips = flips

    @staticmethod
    def _slicer(n_axes, ax_a, val_a, ax_b, val_b):
        sl = [slice(None)] * n_axes
        sl[ax_a] = val_a
        sl[ax_b] = val_b
        return tuple(sl)

    def norm_bound(self) -> float:
        """max |eigenvalue| <= 2|J| * 3/4 + (3/2) * sum |A_k|."""
        p = self.params
        return 2.0 * abs(p.J) * 0.75 + 1.5 * float(np.sum(np.abs(p.A)))

    def apply(self, amp: np.ndarray) -> np.ndarray:
        amp = np.asarray(amp, dtype=np.complex128)
        if amp.shape != (self.dim,):
            raise UsageError(f"state has shape {amp.shape}, operator dim is {self.dim}")
        workers = thread_cap() if self.dim >= _THREAD_DIM else 1
        if workers > 1:
            return self._apply_chunked(amp, workers)
        out = self._diag * amp
        out_t = out.reshape(self._shape)
        amp_t = amp.reshape(self._shape)
        for up_down, down_up, half_c in self._flips:
            out_t[up_down] += half_c * amp_t[down_up]
            out_t[down_up] += half_c * amp_t[up_down]
        return out

    def _apply_chunked(self, amp: np.ndarray, workers: int) -> np.ndarray:
        """Gather form of the same sum, partitioned over output ranges."""
        out = np.empty_like(amp)

        def fill(lo, hi):
            idx = np.arange(lo, hi)
            acc = self._diag[lo:hi] * amp[lo:hi]
            for pa, pb, c in self._pairs:
                differ = ((idx >> pa) & 1) != ((idx >> pb) & 1)
                flipped = amp[idx ^ ((1 << pa) | (1 << pb))]
                acc += np.where(differ, 0.5 * c * flipped, 0.0)
            out[lo:hi] = acc

        bounds = np.linspace(0, self.dim, workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fill, bounds[j], bounds[j + 1])
                       for j in range(workers)]
            for fut in futures:
                fut.result()
        return out


def build_hamiltonian(params: SpinBathParams) -> SpinBathOperator:
    return SpinBathOperator(params)


def initial_state(params: SpinBathParams, env: np.ndarray | None = None) -> StateVector:
    """|up down> on the central pair, random normalized environment.

    Environment coefficients are i.i.d. complex Gaussian (then normalized,
    i.e. uniform on the sphere), drawn reproducibly from params.seed.  An
    explicit ``env`` vector overrides the draw (used for permutation tests).
    """
    n_env = 1 << params.N
    if env is None:
        if params.N == 0:
            env = np.ones(1, dtype=np.complex128)
        else:
            rng = np.random.default_rng([int(params.seed), 1])
            env = rng.standard_normal(n_env) + 1j * rng.standard_normal(n_env)
    env = np.asarray(env, dtype=np.complex128)
    if env.shape != (n_env,):
        raise UsageError(f"environment must have 2^N = {n_env} entries, got {env.shape}")
    env = env / np.linalg.norm(env)
    amp = np.zeros(params.dim, dtype=np.complex128)
    amp[2 * n_env:3 * n_env] = env  # system index a = 0b10 (up-down)
    return StateVector(amp)


def s1z_expectation(psi: StateVector) -> float:
    """<s1^z>: +1/2 weight where the s1 bit is set, -1/2 where it is not."""
    prob = np.abs(psi.amp) ** 2
    half = psi.dim // 2
    return 0.5 * float(np.sum(prob[half:]) - np.sum(prob[:half]))


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """4x4 density matrix of the central pair, indexed by a = 2*s1 + s2."""

    rho: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=np.complex128)
        if r.shape != (4, 4):
            raise UsageError(f"reduced density matrix must be 4x4, got {r.shape}")
        if np.max(np.abs(r - r.conj().T)) > 1e-12:
            raise DensityMatrixError("reduced density matrix is not Hermitian")
        if abs(np.trace(r).real - 1.0) > 1e-10:
            raise DensityMatrixError(f"trace is {np.trace(r).real!r}, expected 1")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


def reduced_density_matrix(psi: StateVector) -> ReducedDensityMatrix:
    """Trace out the bath: rho[a, b] = sum_e psi[a*2^N + e] conj(psi[b*2^N + e])."""
    if psi.dim % 4 != 0:
        raise UsageError(f"state dim {psi.dim} is not 4 * 2^N")
    block = psi.amp.reshape(4, psi.dim // 4)
    return ReducedDensityMatrix(block @ block.conj().T)


def von_neumann_entropy(rho: ReducedDensityMatrix) -> float:
    """S = -sum_i w_i ln w_i over the eigenvalues of rho (0 ln 0 = 0).

    Eigenvalues come from the in-house Jacobi solver; small negative values
    from floating-point partial-trace noise (down to -1e-8) are clamped to
    zero, anything lower is an invalid density matrix.
    """
    w, _ = jacobi_eigh(rho.rho)
    if np.min(w) < -1e-8:
        raise DensityMatrixError(f"eigenvalue {np.min(w):.3e} is significantly negative")
    w = np.clip(w, 0.0, None)
    nz = w[w > 0.0]
    return float(-np.sum(nz * np.log(nz)))
