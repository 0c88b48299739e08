"""Config-driven experiment runner, CSV emission, and the method benchmark.

Config files are line-oriented ``key = value`` under four sections::

    [experiment]   kind, n_steps, record_every, seed
    [model]        spin_bath:   J, N, A_max
                   double_well: omega, lambda, n_basis, m, basis_omega
                   bender:      beta, n_basis, m
    [propagator]   method, dt, tol, k_max, lambda, alpha, e0, renormalize
    [output]       path  ('-' writes CSV to stdout)

Unknown sections or keys are hard errors.  Every CSV starts with '#'-prefixed
metadata (version, seed, full config echo) so a run is reproducible from its
own output file.
"""

from __future__ import annotations

import dataclasses
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import ConfigError, ConvergenceError, UsageError
from .linalg import StateVector, expectation
from .propagators import PropagatorConfig, evolve
from .series import TimeSeries
from . import double_well as dw
from . import spin_bath as sb

EXPERIMENTS = ("spin_bath", "double_well", "bender")


@dataclass(frozen=True)
class SpinBathConfig:
    J: float
    N: int
    A_max: float = 0.5


@dataclass(frozen=True)
class DoubleWellConfig:
    omega: float
    lam: float
    n_basis: int = 50
    m: int = 0
    basis_omega: float | None = None


@dataclass(frozen=True)
class BenderConfig:
    beta: float
    n_basis: int = 32
    m: int = 0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: object
    propagator: PropagatorConfig
    n_steps: int = 900
    record_every: int = 1
    seed: int = 0
    output_path: str = "-"


_MODEL_KEYS = {
    "spin_bath": {"J": (float, None), "N": (int, None), "A_max": (float, 0.5)},
    "double_well": {"omega": (float, None), "lambda": (float, None),
                    "n_basis": (int, 50), "m": (int, 0), "basis_omega": (float, "omega")},
    "bender": {"beta": (float, None), "n_basis": (int, 32), "m": (int, 0)},
}

_PROP_KEYS = {"method": (str, None), "dt": (float, None), "tol": (float, 1e-6),
              "k_max": (int, 30), "lambda": (float, "per-method"), "alpha": (float, -0.5),
              "e0": (float, "none"), "renormalize": (bool, False)}

_EXP_KEYS = {"kind": (str, None), "n_steps": (int, 900), "record_every": (int, 1),
             "seed": (int, 0)}

_OUT_KEYS = {"path": (str, "-")}

_SECTIONS = ("experiment", "model", "propagator", "output")


def _parse_value(kind, raw, key, line):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError(raw)
            return val
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(
            f"line {line}: key {key!r} expects {kind.__name__}, got {raw!r}",
            key=key, line=line) from exc


def _strip_comment(line):
    """Drop a trailing comment: '#' at the start or preceded by whitespace."""
    if line.lstrip().startswith("#"):
        return ""
    for pos, ch in enumerate(line):
        if ch == "#" and pos > 0 and line[pos - 1] in " \t":
            return line[:pos]
    return line


def _read_sections(text):
    sections = {name: {} for name in _SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw).strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if name not in sections:
                raise ConfigError(f"line {lineno}: unknown section [{name}]", line=lineno)
            current = name
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}", line=lineno)
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]", line=lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current}]",
                              key=key, line=lineno)
        sections[current][key] = (value.strip(), lineno)
    return sections


def parse_config(text: str, overrides=None) -> RunConfig:
    """Parse and fully validate a run configuration.

    ``overrides`` is an iterable of 'section.key=value' strings (CLI --set
    flags); they replace file values before validation.
    """
    sections = _read_sections(text)
    for item in overrides or []:
        head, sep, value = item.partition("=")
        if not sep or "." not in head:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        sec, _, key = head.partition(".")
        sec, key = sec.strip(), key.strip()
        if sec not in sections:
            raise ConfigError(f"override {item!r} names unknown section {sec!r}")
        sections[sec][key] = (value.strip(), 0)  # line 0 marks a CLI override

    def take(section, schema, required):
        got = {}
        for key, (raw, line) in sections[section].items():
            if key not in schema:
                raise ConfigError(f"line {line}: unknown key {key!r} in [{section}]",
                                  key=key, line=line)
            got[key] = _parse_value(schema[key][0], raw, key, line)
        missing = [k for k in required if k not in got]
        if missing:
            raise ConfigError(
                f"[{section}] is missing required key(s): {', '.join(missing)}")
        return got

    exp = take("experiment", _EXP_KEYS, ["kind"])
    kind = exp["kind"]
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment.kind must be one of {EXPERIMENTS}, got {kind!r}",
                          key="kind")
    model_schema = _MODEL_KEYS[kind]
    required_model = [k for k, (_, default) in model_schema.items() if default is None]
    model_raw = take("model", model_schema, required_model)
    prop_raw = take("propagator", _PROP_KEYS, ["method", "dt"])
    out_raw = take("output", _OUT_KEYS, [])

    if kind == "spin_bath":
        model = SpinBathConfig(J=model_raw["J"], N=model_raw["N"],
                               A_max=model_raw.get("A_max", 0.5))
        if model.N < 0 or model.N > sb.MAX_BATH_SPINS:
            raise ConfigError(f"model.N must be in [0, {sb.MAX_BATH_SPINS}], got {model.N}",
                              key="N")
        if model.A_max <= 0:
            raise ConfigError(f"model.A_max must be positive, got {model.A_max}", key="A_max")
    elif kind == "double_well":
        model = DoubleWellConfig(omega=model_raw["omega"], lam=model_raw["lambda"],
                                 n_basis=model_raw.get("n_basis", 50),
                                 m=model_raw.get("m", 0),
                                 basis_omega=model_raw.get("basis_omega"))
        _validate_dw(model.omega, model.lam, model.n_basis, model.m, model.basis_omega)
    else:
        model = BenderConfig(beta=model_raw["beta"], n_basis=model_raw.get("n_basis", 32),
                             m=model_raw.get("m", 0))
        if model.beta <= 0:
            raise ConfigError(f"model.beta must be positive, got {model.beta}", key="beta")

    if prop_raw["dt"] <= 0:
        raise ConfigError(f"propagator.dt must be positive, got {prop_raw['dt']}", key="dt")
    try:
        prop = PropagatorConfig(
            method=prop_raw["method"], dt=prop_raw["dt"], tol=prop_raw.get("tol", 1e-6),
            k_max=prop_raw.get("k_max", 30), lam=prop_raw.get("lambda"),
            alpha=prop_raw.get("alpha", -0.5), e0=prop_raw.get("e0"),
            renormalize=prop_raw.get("renormalize", False))
    except UsageError as exc:
        raise ConfigError(f"[propagator] {exc}") from exc

    n_steps = exp.get("n_steps", 900)
    record_every = exp.get("record_every", 1)
    seed = exp.get("seed", 0)
    if n_steps < 0:
        raise ConfigError(f"experiment.n_steps must be >= 0, got {n_steps}", key="n_steps")
    if record_every < 1:
        raise ConfigError(f"experiment.record_every must be >= 1, got {record_every}",
                          key="record_every")
    if seed < 0:
        raise ConfigError(f"experiment.seed must be >= 0, got {seed}", key="seed")
    return RunConfig(experiment=kind, model=model, propagator=prop, n_steps=n_steps,
                     record_every=record_every, seed=seed,
                     output_path=out_raw.get("path", "-"))


def _validate_dw(omega, lam, n_basis, m, basis_omega):
    try:
        dw.DoubleWellParams(omega=omega, lam=lam, n_basis=n_basis, m=m,
                            basis_omega=basis_omega)
    except UsageError as exc:
        raise ConfigError(f"[model] {exc}") from exc


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    lines = ["[experiment]", f"kind = {cfg.experiment}", f"n_steps = {cfg.n_steps}",
             f"record_every = {cfg.record_every}", f"seed = {cfg.seed}", "", "[model]"]
    m = cfg.model
    if isinstance(m, SpinBathConfig):
        lines += [f"J = {m.J!r}", f"N = {m.N}", f"A_max = {m.A_max!r}"]
    elif isinstance(m, DoubleWellConfig):
        lines += [f"omega = {m.omega!r}", f"lambda = {m.lam!r}", f"n_basis = {m.n_basis}",
                  f"m = {m.m}"]
        if m.basis_omega is not None:
            lines.append(f"basis_omega = {m.basis_omega!r}")
    else:
        lines += [f"beta = {m.beta!r}", f"n_basis = {m.n_basis}", f"m = {m.m}"]
    p = cfg.propagator
    lines += ["", "[propagator]", f"method = {p.method}", f"dt = {p.dt!r}",
              f"tol = {p.tol!r}", f"k_max = {p.k_max}"]
    if p.lam is not None:
        lines.append(f"lambda = {p.lam!r}")
    lines.append(f"alpha = {p.alpha!r}")
    if p.e0 is not None:
        lines.append(f"e0 = {p.e0!r}")
    lines += [f"renormalize = {str(p.renormalize).lower()}", "", "[output]",
              f"path = {cfg.output_path}", ""]
    return "\n".join(lines)


def _build_experiment(cfg: RunConfig):
    """Returns (H, psi0, observer, metadata lines)."""
    meta = []
    if cfg.experiment == "spin_bath":
        mc = cfg.model
        couplings = sb.sample_couplings(mc.N, mc.A_max, cfg.seed)
        params = sb.SpinBathParams(J=mc.J, N=mc.N, A=couplings, seed=cfg.seed)
        H = sb.build_hamiltonian(params)
        psi0 = sb.initial_state(params)
        meta.append("A = " + " ".join(f"{a:.15e}" for a in couplings))

        def observer(t, psi):
            # Observables are defined on the unit-norm state; the raw norm is
            # recorded separately as the convergence diagnostic.
            nrm = float(np.linalg.norm(psi.amp))
            unit = psi if abs(nrm - 1.0) < 1e-12 else StateVector(psi.amp / nrm)
            rho = sb.reduced_density_matrix(unit)
            return {"s1z": sb.s1z_expectation(unit),
                    "entropy": sb.von_neumann_entropy(rho),
                    "norm": nrm,
                    "energy": expectation(H, unit)}
        return H, psi0, observer, meta

    if cfg.experiment == "double_well":
        mc = cfg.model
        params = dw.DoubleWellParams(omega=mc.omega, lam=mc.lam, n_basis=mc.n_basis,
                                     m=mc.m, basis_omega=mc.basis_omega)
        shift = 0.0
        x_col = "x_mean"
    else:
        mc = cfg.model
        base, shift = dw.bender_case(mc.beta)
        params = dataclasses.replace(base, n_basis=mc.n_basis, m=mc.m)
        meta.append(f"dropped_constant = {mc.beta ** 2 / 4.0!r}")
        x_col = "q_mean"

    H = dw.build_double_well_matrix(params)
    psi0, leakage = dw.displaced_eigenstate_coeffs(params)
    meta.append(f"x0 = {params.x0!r}")
    meta.append(f"leakage = {leakage!r}")
    x_matrix_freq = params.nu

    def observer(t, psi):
        nrm = float(np.linalg.norm(psi.amp))
        unit = psi if abs(nrm - 1.0) < 1e-12 else StateVector(psi.amp / nrm)
        x_mean, sigma = dw.position_observables(unit, x_matrix_freq, params.n_basis)
        return {x_col: x_mean + shift, "sigma": sigma, "norm": nrm,
                "energy": expectation(H, unit)}
    return H, psi0, observer, meta


def _meta_lines(cfg: RunConfig, extra):
    lines = [f"polyprop v{__version__}", f"seed = {cfg.seed}"]
    lines += extra
    lines += serialize_config(cfg).splitlines()
    return lines


def _write_csv(fh, series: TimeSeries, meta, failed=None):
    for line in meta:
        fh.write(f"# {line}\n" if line else "#\n")
    fh.write(",".join(series.columns) + "\n")
    for row in series.rows:
        fh.write(",".join(f"{v:.15e}" for v in row) + "\n")
    if failed is not None:
        fh.write(f"# FAILED: {failed}\n")


def _open_output(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def run_experiment(cfg: RunConfig) -> TimeSeries:
    """Build the model, evolve, record observables, and emit the CSV.

    On a convergence failure the partial series is flushed with a
    '# FAILED: ...' footer before the error propagates.
    """
    H, psi0, observer, extra_meta = _build_experiment(cfg)
    meta = _meta_lines(cfg, extra_meta)
    try:
        series, report = evolve(H, psi0, cfg.propagator, cfg.n_steps,
                                observer=observer, record_every=cfg.record_every)
    except ConvergenceError as exc:
        partial = getattr(exc, "partial_series", None)
        if cfg.output_path and partial is not None:
            fh, close = _open_output(cfg.output_path)
            try:
                _write_csv(fh, partial, meta, failed=str(exc))
            finally:
                if close:
                    fh.close()
        raise
    meta.append(f"total_matvecs = {report.matvecs}")
    if cfg.output_path:
        fh, close = _open_output(cfg.output_path)
        try:
            _write_csv(fh, series, meta)
        finally:
            if close:
                fh.close()
    return series


@dataclass(frozen=True)
class BenchmarkLeg:
    method: str
    dt: float
    steps: int
    matvecs: int
    wall_s: float
    max_norm_drift: float
    max_deviation: float
    is_reference: bool = False


@dataclass(frozen=True)
class BenchmarkResult:
    legs: tuple
    observable: str
    horizon: float

    def table(self) -> str:
        head = (f"{'method':>12} {'dt':>10} {'steps':>7} {'matvecs':>9} "
                f"{'wall_s':>9} {'norm_drift':>11} {'max_dev':>10}")
        rows = [head]
        for leg in self.legs:
            name = leg.method + ("*" if leg.is_reference else "")
            rows.append(f"{name:>12} {leg.dt:>10.5g} {leg.steps:>7d} {leg.matvecs:>9d} "
                        f"{leg.wall_s:>9.3f} {leg.max_norm_drift:>11.3e} "
                        f"{leg.max_deviation:>10.3e}")
        rows.append(f"(* reference leg; deviations of {self.observable!r} are "
                    f"measured against it over horizon {self.horizon:g})")
        return "\n".join(rows)

    def write_csv(self, fh):
        fh.write("method,dt,steps,matvecs,wall_s,max_norm_drift,max_deviation,is_reference\n")
        for leg in self.legs:
            fh.write(f"{leg.method},{leg.dt:.15e},{leg.steps},{leg.matvecs},"
                     f"{leg.wall_s:.6e},{leg.max_norm_drift:.15e},"
                     f"{leg.max_deviation:.15e},{int(leg.is_reference)}\n")


REFERENCE_TOL = 1e-12


def benchmark_compare(cfg_base: RunConfig, methods, dt_map, horizon: float) -> BenchmarkResult:
    """Propagate one model with several methods to the same physical horizon.

    All legs share the model and initial state of ``cfg_base``.  An extra
    Laguerre leg at tol=1e-12 and the finest dt serves as the high-accuracy
    reference; per-leg deviation is the max difference of the experiment's
    primary observable against it on the shared time grid.  Matvec counts
    come from StepReport aggregation, never estimates.
    """
    methods = list(methods)
    if not methods:
        raise UsageError("benchmark needs at least one method")
    for m in methods:
        if m not in dt_map:
            raise UsageError(f"no dt given for method {m!r}")
    H, psi0, observer, _ = _build_experiment(cfg_base)
    primary = {"spin_bath": "s1z", "double_well": "x_mean", "bender": "q_mean"}[
        cfg_base.experiment]

    def steps_for(dt):
        n = round(horizon / dt)
        if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, abs(horizon)):
            raise UsageError(
                f"dt {dt} does not divide the horizon {horizon} into whole steps")
        return n

    legs = []
    ref_dt = min(dt_map[m] for m in methods)
    plans = [("laguerre", ref_dt, True)] + [(m, float(dt_map[m]), False) for m in methods]
    series_by_leg = []
    for method, dt, is_ref in plans:
        n = steps_for(dt)
        pcfg = dataclasses.replace(cfg_base.propagator, method=method, dt=dt)
        if is_ref:
            pcfg = dataclasses.replace(pcfg, tol=REFERENCE_TOL,
                                       k_max=max(60, cfg_base.propagator.k_max))
        t0 = time.perf_counter()
        series, report = evolve(H, psi0, pcfg, n, observer=observer, record_every=1)
        wall = time.perf_counter() - t0
        series_by_leg.append(series)
        legs.append(BenchmarkLeg(method=method, dt=dt, steps=n, matvecs=report.matvecs,
                                 wall_s=wall, max_norm_drift=report.norm_drift,
                                 max_deviation=0.0, is_reference=is_ref))

    ref_series = series_by_leg[0]
    ref_y = ref_series.column(primary)
    out = []
    for leg, series in zip(legs, series_by_leg):
        if leg.is_reference:
            out.append(leg)
            continue
        y = series.column(primary)
        t = series.column("t")
        ref_idx = np.rint(t / ref_dt).astype(int)
        if np.max(np.abs(ref_idx * ref_dt - t)) > 1e-9 * max(1.0, horizon):
            raise UsageError(
                f"legs do not share a time grid: dt {leg.dt} vs reference {ref_dt}")
        dev = float(np.max(np.abs(y - ref_y[ref_idx])))
        out.append(dataclasses.replace(leg, max_deviation=dev))
    return BenchmarkResult(legs=tuple(out), observable=primary, horizon=float(horizon))
