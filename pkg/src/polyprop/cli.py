"""Command-line entry points.

Subcommands: run, bench, identity-check, advise-dt.
Exit codes: 0 success, 1 check failure, 2 config/usage error, 3 convergence failure.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .errors import ConfigError, ConvergenceError, PolypropError, UsageError
from .harness import benchmark_compare, parse_config, run_experiment
from .propagators import (bessel_j_sequence, hermite_scalar, laguerre_scalar,
                          suggest_dt_hermite, suggest_dt_laguerre)


def _load_config(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, overrides=args.set)


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    series = run_experiment(cfg)
    print(f"wrote {len(series)} rows ({', '.join(series.columns)}) to "
          f"{cfg.output_path}", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_config(args)
    dt_map = {}
    methods = []
    for item in args.method:
        name, sep, dts = item.partition("=")
        if not sep:
            raise UsageError(f"--method wants NAME=DT, got {item!r}")
        methods.append(name.strip())
        dt_map[name.strip()] = float(dts)
    result = benchmark_compare(cfg, methods, dt_map, args.horizon)
    print(result.table())
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            result.write_csv(fh)
        print(f"benchmark CSV written to {args.output}", file=sys.stderr)
    return 0


def _cmd_identity_check(args) -> int:
    """Numerical identity suite for the polynomial machinery."""
    checks = []

    worst = 0.0
    for k in range(0, 11):
        for x in (0.5, 1.0, 2.0):
            lhs = laguerre_scalar(k, -0.5, x * x)
            rhs = (-1.0) ** k / (4.0 ** k * math.factorial(k)) * hermite_scalar(2 * k, x)
            worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    checks.append(("laguerre-hermite identity (k<=10)", worst <= 1e-9, f"rel err {worst:.2e}"))

    worst = 0.0
    for tau in np.linspace(0.3, 9.7, 12):
        seq = bessel_j_sequence(float(tau), 60)
        total = seq[0] + 2.0 * np.sum(seq[2::2])
        worst = max(worst, abs(total - 1.0))
    checks.append(("bessel normalization J0 + 2*sum J_2k = 1", worst <= 1e-12,
                   f"max dev {worst:.2e}"))

    worst = 0.0
    for tau in np.linspace(0.3, 9.7, 12):
        seq = bessel_j_sequence(float(tau), 60)
        total = seq[0] ** 2 + 2.0 * np.sum(seq[1:] ** 2)
        worst = max(worst, abs(total - 1.0))
    checks.append(("bessel sum of squares = 1", worst <= 1e-12, f"max dev {worst:.2e}"))

    worst = 0.0
    for x in (-2.0, -0.5, 0.3, 1.7):
        for k in range(2, 40):
            resid = hermite_scalar(k + 1, x) - (2 * x * hermite_scalar(k, x)
                                                - 2 * k * hermite_scalar(k - 1, x))
            scale = max(abs(hermite_scalar(k + 1, x)), 1.0)
            worst = max(worst, abs(resid) / scale)
    checks.append(("hermite recursion self-consistency", worst <= 1e-12,
                   f"rel resid {worst:.2e}"))

    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
        ok = ok and passed
    return 0 if ok else 1


def _cmd_advise_dt(args) -> int:
    dt_h = suggest_dt_hermite(args.em, args.k, getattr(args, "lambda"))
    dt_l = suggest_dt_laguerre(args.em, args.k)
    print(f"hermite  dt <= {dt_h:.6g}   (E_m={args.em:g}, k={args.k}, "
          f"lambda={getattr(args, 'lambda'):g})")
    print(f"laguerre dt <= {dt_l:.6g}   (E_m={args.em:g}, k={args.k})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyprop",
        description="Polynomial-expansion propagators: run experiments, "
                    "benchmark methods, check identities.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment, emit CSV")
    p_run.add_argument("--config", required=True, help="path to the config file")
    p_run.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="override a config value (repeatable)")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="compare methods on one model")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL")
    p_bench.add_argument("--method", action="append", metavar="NAME=DT",
                         default=None, help="method and its dt (repeatable)")
    p_bench.add_argument("--horizon", type=float, default=32.4)
    p_bench.add_argument("--output", default=None, help="benchmark CSV path")
    p_bench.set_defaults(func=_cmd_bench)

    p_id = sub.add_parser("identity-check", help="run the polynomial identity suite")
    p_id.set_defaults(func=_cmd_identity_check)

    p_adv = sub.add_parser("advise-dt", help="print the Hermite and Laguerre dt bounds")
    p_adv.add_argument("--em", type=float, required=True, help="energy scale E_m")
    p_adv.add_argument("--k", type=int, default=30, help="series order")
    p_adv.add_argument("--lambda", type=float, default=0.5, help="Hermite lambda")
    p_adv.set_defaults(func=_cmd_advise_dt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.method is None:
        args.method = ["laguerre=0.036", "rk4=0.0036"]
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PolypropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
