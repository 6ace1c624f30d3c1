"""Command line entry point ``linphase``.

Exit codes: 0 success, 2 configuration or input-format error, 3 numerical
failure. ``LINPHASE_WORKERS`` overrides the worker-process count.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..coherence import CoherenceError
from ..lbfgs import NonFiniteObjectiveError
from ..models import GeometryError
from ..numerics import DimensionError
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    SOLVE_METHODS,
    NumericalFailure,
    run_antenna_benchmark,
    run_gauss_sweep,
    run_solve,
)
from .io import FormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("linphase")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linphase", description="Phase retrieval with partially coherent data.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("gauss-sweep", "success-rate sweep on Gaussian instances"),
                           ("antenna", "dipole antenna benchmark")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", help="output directory (default: 'out' key of the config)")

    p = sub.add_parser("solve", help="solve an instance stored in CSV/JSON files")
    p.add_argument("--operator", required=True, help="matrix CSV (row,col,re,im)")
    p.add_argument("--magnitudes", required=True, help="measurement CSV (index,magnitude[,phase_diff])")
    p.add_argument("--coherence", required=True, help="coherence groups JSON")
    p.add_argument("--reference", help="true field CSV (index,re,im) for deviation report")
    p.add_argument("--method", default="linear-pc", choices=SOLVE_METHODS)
    p.add_argument("--config", help="optional JSON config supplying solver settings")
    p.add_argument("--out", default=".", help="output directory")
    return parser


def _experiment(args, kind: str) -> int:
    config = load_config(args.config)
    if config.kind != kind:
        raise ConfigError(f"config kind is {config.kind!r}, command expects {kind!r}")
    out = args.out or config.out
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    if kind == "gauss-sweep":
        result = run_gauss_sweep(config, out)
        for row in result.summary:
            print(f"m2={row['m2']:3d} {row['method']:22s} rate={row['rate']:.4f}")
    else:
        result = run_antenna_benchmark(config, out)
        for row in result.summary:
            print(f"{row['method']:22s} median eps_c={row['median_epsilon_c']:9.3f} dB"
                  f"  eps_m={row['median_epsilon_m']:9.3f} dB")
    print(f"results written to {out}")
    return EXIT_OK


def _solve(args) -> int:
    settings = None
    if args.config:
        settings = load_config(args.config).solver
    outcome = run_solve(args.operator, args.magnitudes, args.coherence, args.method,
                        args.reference, args.out, settings)
    print(f"method {args.method}: {outcome.z.shape[0]} coefficients, iterations {outcome.iterations}"
          + (f", flags {';'.join(outcome.flags)}" if outcome.flags else ""))
    if outcome.deviation is not None:
        print(f"epsilon_c {outcome.deviation.epsilon_c:.4f} dB, epsilon_m {outcome.deviation.epsilon_m:.4f} dB")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return _solve(args)
        return _experiment(args, args.command)
    except (ConfigError, FormatError, CoherenceError, DimensionError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, NonFiniteObjectiveError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
