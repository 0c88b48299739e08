"""Polynomial-expansion steppers for exp(-iHt), plus RK4/ABM4 references.

Each polynomial stepper realizes one orthogonal-polynomial expansion of the
evolution operator through a three-term recursion in matrix-vector products:

  chebyshev: exp(-i tau Ht) = sum_k a_k (-i)^k J_k(tau) T_k(Ht),
             Ht = 2H/E0, tau = E0*dt/2, a_0 = 1, a_k = 2
  hermite:   exp(-iHt) = exp(-(t/2L)^2) sum_k ((-i)^k/k!) (t/2L)^k H_k(L*H)
  laguerre:  exp(-iHt) = (L/(L+it))^(a+1) sum_k (it/(L+it))^k L_k^a(L*H)

Series are truncated when the coefficient-weighted norm of a term falls below
the configured tolerance on two consecutive orders.  A single sub-tolerance
term is not trusted: Bessel factors and Hermite polynomials pass through
zeros (J_k(tau) in tau, H_k(0) for odd k), and stopping on one accidental
zero would silently drop the rest of a live series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, EstimationError, UsageError
from .linalg import ZERO_NORM, HermitianOperator, StateVector
from .series import TimeSeries

METHODS = ("chebyshev", "hermite", "laguerre", "rk4", "abm4")
POLYNOMIAL_METHODS = ("chebyshev", "hermite", "laguerre")

# Default expansion parameters: lambda = 1/2 for the Hermite series and
# lambda = 1, alpha = -1/2 for the Laguerre series.
DEFAULT_LAMBDA = {"hermite": 0.5, "laguerre": 1.0, "chebyshev": 1.0}
DEFAULT_ALPHA = -0.5
DEFAULT_K_MAX = 30
K_MAX_CAP = 200


@dataclass(frozen=True)
class PropagatorConfig:
    """Method selector plus every expansion knob the steppers read.

    ``dt`` may be zero (the step degenerates to the identity) or negative
    (used by time-reversal checks); it only has to be finite.  ``lam`` left
    as None picks the per-method default.
    """

    method: str
    dt: float
    tol: float = 1e-6
    k_max: int = DEFAULT_K_MAX
    lam: float | None = None
    alpha: float = DEFAULT_ALPHA
    e0: float | None = None
    renormalize: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}; pick one of {METHODS}")
        if not math.isfinite(self.dt):
            raise UsageError(f"dt must be finite, got {self.dt}")
        if not (self.tol > 0.0 and math.isfinite(self.tol)):
            raise UsageError(f"tol must be a positive real, got {self.tol}")
        if not (1 <= int(self.k_max) <= K_MAX_CAP):
            raise UsageError(f"k_max must be in [1, {K_MAX_CAP}], got {self.k_max}")
        if self.lam is not None and not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise UsageError(f"lambda must be a positive real, got {self.lam}")
        if not (self.alpha > -1.0 and math.isfinite(self.alpha)):
            raise UsageError(f"alpha must be > -1, got {self.alpha}")
        if self.e0 is not None and not (self.e0 > 0.0 and math.isfinite(self.e0)):
            raise UsageError(f"E0 must be a positive real when given, got {self.e0}")

    def resolved_lambda(self) -> float:
        if self.lam is not None:
            return float(self.lam)
        return DEFAULT_LAMBDA.get(self.method, 1.0)


@dataclass(frozen=True)
class StepReport:
    """Cost and convergence record of one step (or an aggregated run).

    ``terms_used`` counts series terms actually accumulated; ``matvecs``
    counts operator applications, which always at least match it because the
    stop rule evaluates term norms on computed vectors.  Aggregated reports
    carry total matvecs, the per-step maxima of the other fields.
    """

    terms_used: int
    matvecs: int
    last_term_norm: float
    norm_drift: float

    def __post_init__(self):
        if self.matvecs < self.terms_used:
            raise UsageError(
                f"matvecs ({self.matvecs}) cannot undercut terms_used ({self.terms_used})")


def bessel_j_sequence(tau: float, k_max: int) -> np.ndarray:
    """J_0(tau) .. J_kmax(tau) by Miller's downward recurrence.

    Upward recurrence is unstable for orders above tau, so the sequence is
    generated downward from a start order safely beyond max(k_max, |tau|) and
    normalized with J_0 + 2*sum_k J_2k = 1.  Negative tau uses the parity
    J_k(-tau) = (-1)^k J_k(tau).
    """
    if not math.isfinite(tau):
        raise UsageError(f"tau must be finite, got {tau}")
    if abs(tau) >= 1e4:
        raise UsageError(f"|tau| must be below 1e4, got {tau}")
    if k_max < 0:
        raise UsageError(f"k_max must be >= 0, got {k_max}")
    out = np.zeros(k_max + 1)
    a = abs(tau)
    if a == 0.0:
        out[0] = 1.0
        return out

    top = max(k_max, int(math.ceil(a)))
    start = top + 36 + int(2.5 * math.sqrt(float(top)))
    j_next = 0.0
    j_cur = 1e-30
    total = 0.0
    for k in range(start, 0, -1):
        if k <= k_max:
            out[k] = j_cur
        if k % 2 == 0:
            total += 2.0 * j_cur
        j_prev = (2.0 * k / a) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            total *= 1e-250
            out *= 1e-250
    out[0] = j_cur
    total += j_cur
    out /= total
    if tau < 0.0:
        out[1::2] *= -1.0
    return out


def hermite_scalar(k: int, x: float) -> float:
    """H_k(x) via the same three-term recursion the operator stepper runs."""
    if not (0 <= k <= K_MAX_CAP):
        raise UsageError(f"k must be in [0, {K_MAX_CAP}], got {k}")
    h_prev, h_cur = 1.0, 2.0 * x
    if k == 0:
        return h_prev
    for j in range(1, k):
        h_prev, h_cur = h_cur, 2.0 * x * h_cur - 2.0 * j * h_prev
    return h_cur


def laguerre_scalar(k: int, alpha: float, x: float) -> float:
    """L_k^alpha(x) via the three-term recursion (alpha > -1)."""
    if not (0 <= k <= K_MAX_CAP):
        raise UsageError(f"k must be in [0, {K_MAX_CAP}], got {k}")
    if not alpha > -1.0:
        raise UsageError(f"alpha must be > -1, got {alpha}")
    l_prev, l_cur = 1.0, alpha + 1.0 - x
    if k == 0:
        return l_prev
    for j in range(1, k):
        l_next = ((2.0 * j + alpha + 1.0 - x) * l_cur - (j + alpha) * l_prev) / (j + 1.0)
        l_prev, l_cur = l_cur, l_next
    return l_cur


def suggest_dt_hermite(e_m: float, k: int, lam: float) -> float:
    """Largest dt the Hermite series tolerates at order k for energy scale e_m."""
    if not (e_m >= 0.0 and math.isfinite(e_m)):
        raise UsageError(f"e_m must be a finite nonnegative real, got {e_m}")
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if not (lam > 0.0 and math.isfinite(lam)):
        raise UsageError(f"lambda must be a positive real, got {lam}")
    return math.sqrt(k / math.e) * lam * math.exp(-(lam * e_m) ** 2 / (2.0 * k))


def suggest_dt_laguerre(e_m: float, k: int) -> float:
    """Largest dt the Laguerre series tolerates at order k for energy scale e_m."""
    if not (e_m >= 0.0 and math.isfinite(e_m)):
        raise UsageError(f"e_m must be a finite nonnegative real, got {e_m}")
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    return (math.exp((e_m + math.log(2.0)) / k) - 1.0) ** -0.5


def estimate_spectral_bound(H: HermitianOperator, max_iters: int = 200,
                            rtol: float = 1e-3, seed: int = 0xB0) -> float:
    """E0 >= 2 * max|eigenvalue| for the Chebyshev rescaling.

    Resolution order: a model-provided analytic bound, then Gershgorin row
    sums when an explicit matrix is exposed, then power iteration on H^2 with
    a 1.1 safety factor (seeded start, so deterministic).
    """
    bound = H.norm_bound()
    if bound is not None:
        return 2.0 * float(bound)
    matrix = getattr(H, "matrix", None)
    if matrix is not None:
        return 2.0 * float(np.max(np.sum(np.abs(matrix), axis=1)))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
    v /= np.linalg.norm(v)
    prev = None
    for _ in range(max_iters):
        w = H.apply(H.apply(v))
        mu = float(np.linalg.norm(w))  # Rayleigh step toward max eig of H^2
        if mu < ZERO_NORM:
            return 0.0
        v = w / mu
        if prev is not None and abs(mu - prev) <= rtol * mu:
            return 2.0 * 1.1 * math.sqrt(mu)
        prev = mu
    raise EstimationError(
        f"power iteration on H^2 did not settle within {max_iters} iterations")


class _SeriesSum:
    """Accumulates weighted series terms under the two-consecutive-small stop rule.

    A term whose weighted norm drops below tol is held pending: if the next
    term is small too the series is declared converged and both are dropped;
    if the next term recovers, the pending one is flushed into the sum.
    """

    def __init__(self, first_term: np.ndarray, tol: float):
        self.acc = np.array(first_term, dtype=np.complex128)
        self.tol = tol
        self.terms_used = 1
        self.last_w = float("nan")
        self._pending = None

    def feed(self, term: np.ndarray, w: float) -> bool:
        self.last_w = w
        if w < self.tol:
            if self._pending is not None:
                self._pending = None
                return True
            self._pending = term
            return False
        if self._pending is not None:
            self.acc += self._pending
            self.terms_used += 1
            self._pending = None
        self.acc += term
        self.terms_used += 1
        return False


def _finish_polynomial_step(acc: np.ndarray, cfg: PropagatorConfig, terms: int,
                            matvecs: int, last_w: float, in_norm: float):
    # Drift is this step's norm change, so inherited drift from earlier steps
    # of a long run does not count against the per-step budget.
    nrm = float(np.linalg.norm(acc))
    drift = abs(nrm - in_norm)
    if cfg.renormalize and nrm > ZERO_NORM:
        acc = acc / nrm
    return StateVector(acc), StepReport(terms, matvecs, last_w, drift)


def _required_chebyshev_terms(tau: float, tol: float, k_max: int):
    """How many terms the Bessel coefficients say this tau needs, or None."""
    limit = min(2000, max(4 * k_max, int(math.ceil(abs(tau))) + 80, 128))
    try:
        coeff = 2.0 * np.abs(bessel_j_sequence(tau, limit))
    except UsageError:
        return None
    small = coeff < tol
    for j in range(1, limit):
        if small[j] and small[j + 1]:
            return j
    return None


def chebyshev_step(H: HermitianOperator, psi: StateVector, cfg: PropagatorConfig):
    """One Chebyshev step; needs the spectrum of H inside [-E0/2, +E0/2].

    E0 comes from cfg.e0 when set, otherwise from `estimate_spectral_bound`.
    Returns (state, report); raises ConvergenceError naming the required
    order when the series has not converged within k_max terms.
    """
    if H.dim != psi.dim:
        raise UsageError(f"dimension mismatch: operator {H.dim}, state {psi.dim}")
    e0 = cfg.e0 if cfg.e0 is not None else estimate_spectral_bound(H)
    if e0 < 0.0:
        raise UsageError(f"E0 must be nonnegative, got {e0}")
    tau = 0.5 * e0 * cfg.dt
    scale = 2.0 / e0 if e0 > ZERO_NORM else 0.0
    bessel = bessel_j_sequence(tau, cfg.k_max - 1)

    amp = psi.copy_amp()
    in_norm = float(np.linalg.norm(amp))
    series = _SeriesSum(bessel[0] * amp, cfg.tol)
    t_prev = amp
    t_cur = scale * H.apply(amp)
    matvecs = 1
    phase = -1.0j
    stopped = False
    k = 1
    while k <= cfg.k_max - 1:
        coeff = 2.0 * bessel[k] * phase
        w = abs(coeff) * float(np.linalg.norm(t_cur))
        if series.feed(coeff * t_cur, w):
            stopped = True
            break
        k += 1
        if k > cfg.k_max - 1:
            break
        t_next = 2.0 * scale * H.apply(t_cur) - t_prev
        matvecs += 1
        t_prev, t_cur = t_cur, t_next
        phase *= -1.0j
    if not stopped:
        need = _required_chebyshev_terms(tau, cfg.tol, cfg.k_max)
        need_msg = f"about {need} terms" if need is not None else "more terms than scanned"
        raise ConvergenceError(
            f"chebyshev series not converged within k_max={cfg.k_max} terms at "
            f"tau={tau:.6g} (last weighted term {series.last_w:.3e}); needs {need_msg}",
            required_k=need)
    return _finish_polynomial_step(series.acc, cfg, series.terms_used, matvecs,
                                   series.last_w, in_norm)


def hermite_step(H: HermitianOperator, psi: StateVector, cfg: PropagatorConfig):
    """One Hermite-expansion step.

    phi_0 = psi, phi_1 = 2L*H psi, phi_{k+1} = 2L*H phi_k - 2k phi_{k-1};
    the step returns exp(-(dt/2L)^2) * sum_k ((-i)^k/k!)(dt/2L)^k phi_k.
    The recursion is not absolutely stable, so failure to converge within
    k_max raises with a smaller-dt advisory from `suggest_dt_hermite`.
    """
    if H.dim != psi.dim:
        raise UsageError(f"dimension mismatch: operator {H.dim}, state {psi.dim}")
    lam = cfg.resolved_lambda()
    r = cfg.dt / (2.0 * lam)
    pref = math.exp(-r * r)

    amp = psi.copy_amp()
    in_norm = float(np.linalg.norm(amp))
    series = _SeriesSum(pref * amp, cfg.tol)
    h_psi = H.apply(amp)
    matvecs = 1
    em_est = float(np.linalg.norm(h_psi))
    phi_prev = amp
    phi_cur = 2.0 * lam * h_psi
    coeff = complex(pref)
    w_min = pref
    stopped = False
    k = 1
    while k <= cfg.k_max - 1:
        coeff = coeff * (-1.0j * r) / k
        w = abs(coeff) * float(np.linalg.norm(phi_cur))
        if series.feed(coeff * phi_cur, w):
            stopped = True
            break
        w_min = min(w_min, w)
        k += 1
        if k > cfg.k_max - 1:
            break
        phi_next = 2.0 * lam * H.apply(phi_cur) - 2.0 * (k - 1) * phi_prev
        matvecs += 1
        phi_prev, phi_cur = phi_cur, phi_next
    if not stopped:
        hint = suggest_dt_hermite(em_est, cfg.k_max, lam)
        grow = " (term norms growing: recursion instability)" if series.last_w > 10.0 * w_min else ""
        raise ConvergenceError(
            f"hermite series not converged within k_max={cfg.k_max} terms{grow}; "
            f"last weighted term {series.last_w:.3e}; try dt <= {hint:.6g} "
            f"(energy scale estimated from ||H psi|| = {em_est:.6g})",
            suggested_dt=hint)
    state, report = _finish_polynomial_step(series.acc, cfg, series.terms_used,
                                            matvecs, series.last_w, in_norm)
    if report.norm_drift > 10.0 * cfg.tol:
        hint = suggest_dt_hermite(em_est, cfg.k_max, lam)
        raise ConvergenceError(
            f"hermite step lost unitarity: | ||psi'|| - 1 | = {report.norm_drift:.3e} "
            f"> 10*tol; try dt <= {hint:.6g}", suggested_dt=hint)
    return state, report


def laguerre_step(H: HermitianOperator, psi: StateVector, cfg: PropagatorConfig):
    """One Laguerre-expansion step (type alpha > -1).

    phi_0 = psi, phi_1 = (a+1 - L*H) psi,
    (k+1) phi_{k+1} = (2k+a+1 - L*H) phi_k - (k+a) phi_{k-1};
    the step returns (L/(L+i dt))^(a+1) * sum_k (i dt/(L+i dt))^k phi_k with
    the principal branch of the complex power (L > 0 keeps the base in the
    right half-plane).
    """
    if H.dim != psi.dim:
        raise UsageError(f"dimension mismatch: operator {H.dim}, state {psi.dim}")
    lam = cfg.resolved_lambda()
    alpha = cfg.alpha
    denom = lam + 1.0j * cfg.dt
    pref = complex((lam / denom) ** (alpha + 1.0))
    s = 1.0j * cfg.dt / denom
    s_mag = abs(s)

    amp = psi.copy_amp()
    in_norm = float(np.linalg.norm(amp))
    series = _SeriesSum(pref * amp, cfg.tol)
    h_psi = H.apply(amp)
    matvecs = 1
    em_est = lam * float(np.linalg.norm(h_psi))
    phi_prev = amp
    phi_cur = (alpha + 1.0) * amp - lam * h_psi
    coeff = pref
    w_min = abs(pref)
    stopped = False
    k = 1
    while k <= cfg.k_max - 1:
        coeff = coeff * s
        w = abs(coeff) * float(np.linalg.norm(phi_cur))
        if series.feed(coeff * phi_cur, w):
            stopped = True
            break
        w_min = min(w_min, w)
        k += 1
        if k > cfg.k_max - 1:
            break
        j = k - 1  # recursion index of the term just fed
        phi_next = ((2.0 * j + alpha + 1.0) * phi_cur - lam * H.apply(phi_cur)
                    - (j + alpha) * phi_prev) / (j + 1.0)
        matvecs += 1
        phi_prev, phi_cur = phi_cur, phi_next
    if not stopped:
        hint = suggest_dt_laguerre(em_est, cfg.k_max)
        grow = " (term norms growing: recursion instability)" if series.last_w > 10.0 * w_min else ""
        raise ConvergenceError(
            f"laguerre series not converged within k_max={cfg.k_max} terms{grow}; "
            f"last weighted term {series.last_w:.3e}, |s| = {s_mag:.6g}; "
            f"try dt <= {hint:.6g} (energy scale estimated as lambda*||H psi|| = {em_est:.6g})",
            suggested_dt=hint, s_magnitude=s_mag)
    state, report = _finish_polynomial_step(series.acc, cfg, series.terms_used,
                                            matvecs, series.last_w, in_norm)
    if report.norm_drift > 10.0 * cfg.tol:
        hint = suggest_dt_laguerre(em_est, cfg.k_max)
        raise ConvergenceError(
            f"laguerre step lost unitarity: | ||psi'|| - 1 | = {report.norm_drift:.3e} "
            f"> 10*tol; |s| = {s_mag:.6g}; try dt <= {hint:.6g}",
            suggested_dt=hint, s_magnitude=s_mag)
    return state, report


def rk4_step(H: HermitianOperator, psi: StateVector, dt: float) -> StateVector:
    """Classical 4th-order Runge-Kutta step for dpsi/dt = -iH psi (4 matvecs)."""
    out, _ = _rk4_with_deriv(H, psi.copy_amp(), dt)
    return StateVector(out)


def _rk4_with_deriv(H: HermitianOperator, amp: np.ndarray, dt: float):
    k1 = -1.0j * H.apply(amp)
    k2 = -1.0j * H.apply(amp + 0.5 * dt * k1)
    k3 = -1.0j * H.apply(amp + 0.5 * dt * k2)
    k4 = -1.0j * H.apply(amp + dt * k3)
    return amp + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


@dataclass(frozen=True)
class Abm4History:
    """State plus the four newest derivative evaluations (newest first)."""

    amp: np.ndarray
    derivs: tuple

    def __post_init__(self):
        if len(self.derivs) != 4:
            raise UsageError("abm4 history needs exactly 4 derivative evaluations")


def abm4_bootstrap(H: HermitianOperator, psi: StateVector, dt: float):
    """Three RK4 steps to assemble the ABM4 history (13 matvecs total).

    Returns (states after steps 1..3, history at step 3).
    """
    amp = psi.copy_amp()
    states = []
    derivs = []
    for _ in range(3):
        amp, f = _rk4_with_deriv(H, amp, dt)
        derivs.append(f)
        states.append(StateVector(amp))
    derivs.append(-1.0j * H.apply(amp))
    return states, Abm4History(amp, (derivs[3], derivs[2], derivs[1], derivs[0]))


def abm4_step(H: HermitianOperator, history: Abm4History, dt: float):
    """One Adams-Bashforth-Moulton PECE step (2 matvecs).

    Predict with AB4, evaluate, correct with AM4, evaluate again to extend
    the derivative history.  Returns (state, new history).
    """
    f0, f1, f2, f3 = history.derivs
    amp = history.amp
    pred = amp + (dt / 24.0) * (55.0 * f0 - 59.0 * f1 + 37.0 * f2 - 9.0 * f3)
    f_pred = -1.0j * H.apply(pred)
    corr = amp + (dt / 24.0) * (9.0 * f_pred + 19.0 * f0 - 5.0 * f1 + f2)
    f_new = -1.0j * H.apply(corr)
    return StateVector(corr), Abm4History(corr, (f_new, f0, f1, f2))


_STEPPERS = {"chebyshev": chebyshev_step, "hermite": hermite_step, "laguerre": laguerre_step}


def evolve(H: HermitianOperator, psi0: StateVector, cfg: PropagatorConfig,
           n_steps: int, observer=None, record_every: int = 1):
    """Apply the configured stepper n_steps times, recording observables.

    ``observer(t, state)`` may return a mapping of named observables; the
    returned TimeSeries holds one row per recorded step (step 0 always, then
    every ``record_every``-th).  The aggregate StepReport carries the total
    matvec count and per-step maxima.  Hermite/Laguerre steps enforce a
    per-step drift of at most 10*tol themselves; on top of that the loop
    aborts (ConvergenceError with the step index) if the accumulated drift
    ever exceeds n_steps * 10 * tol, so a completed run guarantees
    | ||psi(t)|| - 1 | <= n_steps * 10 * tol throughout.
    """
    if n_steps < 0:
        raise UsageError(f"n_steps must be >= 0, got {n_steps}")
    if record_every < 1:
        raise UsageError(f"record_every must be >= 1, got {record_every}")
    if abs(float(np.linalg.norm(psi0.amp)) - 1.0) > 1e-8:
        raise UsageError("psi0 must be normalized")
    if n_steps > 0 and not cfg.dt > 0.0:
        raise UsageError("evolve needs dt > 0 (signed dt is for single steps)")

    def record(t, state):
        nonlocal series
        obs = observer(t, state) if observer is not None else {}
        if series is None:
            series = TimeSeries(["t"] + list(obs.keys()))
        series.append(t, list(obs.values()))

    series = None
    record(0.0, psi0)

    psi = psi0
    total_matvecs = 0
    max_terms = 0
    max_last_w = 0.0
    max_drift = 0.0
    stepper = _STEPPERS.get(cfg.method)
    history = None
    boot_derivs = []
    for i in range(1, n_steps + 1):
        try:
            if stepper is not None:
                psi, rep = stepper(H, psi, cfg)
                total_matvecs += rep.matvecs
                max_terms = max(max_terms, rep.terms_used)
                max_last_w = max(max_last_w, rep.last_term_norm)
            elif cfg.method == "rk4":
                amp, _ = _rk4_with_deriv(H, psi.copy_amp(), cfg.dt)
                total_matvecs += 4
                psi = StateVector(amp)
            else:  # abm4: RK4 bootstrap for the first three steps
                if i <= 3:
                    amp, f = _rk4_with_deriv(H, psi.copy_amp(), cfg.dt)
                    total_matvecs += 4
                    boot_derivs.append(f)
                    psi = StateVector(amp)
                    if i == 3:
                        f3 = -1.0j * H.apply(amp)
                        total_matvecs += 1
                        history = Abm4History(
                            amp, (f3, boot_derivs[2], boot_derivs[1], boot_derivs[0]))
                else:
                    psi, history = abm4_step(H, history, cfg.dt)
                    total_matvecs += 2
        except ConvergenceError as exc:
            wrapped = ConvergenceError(
                f"step {i} (t = {i * cfg.dt:.6g}): {exc}",
                required_k=exc.required_k, suggested_dt=exc.suggested_dt,
                step_index=i, s_magnitude=exc.s_magnitude)
            wrapped.partial_series = series  # rows recorded before the failure
            raise wrapped from exc
        drift = abs(float(np.linalg.norm(psi.amp)) - 1.0)
        max_drift = max(max_drift, drift)
        if stepper is not None and not cfg.renormalize and drift > n_steps * 10.0 * cfg.tol:
            err = ConvergenceError(
                f"norm drift {drift:.3e} at step {i} exceeds the run budget "
                f"n_steps * 10 * tol = {n_steps * 10.0 * cfg.tol:.3e}", step_index=i)
            err.partial_series = series
            raise err
        if i % record_every == 0:
            record(i * cfg.dt, psi)
    report = StepReport(max_terms, total_matvecs, max_last_w, max_drift)
    return series, report
