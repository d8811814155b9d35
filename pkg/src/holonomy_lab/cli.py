"""Command-line interface.

Subcommands: `run <config>` executes a sweep described by a flat key=value
config file (flags override single keys), `revivals` prints closed-form
revival durations, `optimal-report <config>` locates the noisy fidelity
peak nearest the first revival, and `rates` prints the rate table derived
from an Ohmic bath.  Data goes to files (or stdout for the small
inspection commands); diagnostics go to stderr.  Exit codes: 0 success,
1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import (ConfigError, IntegrationDivergedError,
                     QuadratureConvergenceError, ValidationError)
from .experiments import format_report, optimal_time_report, parse_config, run_experiment
from .lindblad import LEVELS, OhmicBath, rates_from_bath
from .propagator import revival_times


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--figure", choices=("ideal-mean", "per-state",
                                             "noisy-mean", "ohmic-mean"))
    parser.add_argument("--tau-min", dest="tau_min", type=float)
    parser.add_argument("--tau-max", dest="tau_max", type=float)
    parser.add_argument("--tau-points", dest="tau_points", type=int)
    parser.add_argument("--lambda2", help="comma-separated list")
    parser.add_argument("--preset", choices=("fixed", "ohmic"))
    parser.add_argument("--kappa", type=float)
    parser.add_argument("--omega-c", dest="omega_c", type=float)
    parser.add_argument("--temperature", help="comma-separated list")
    parser.add_argument("--samples", type=int)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--workers", type=int)


def _overrides_from(args: argparse.Namespace) -> dict:
    keys = ("figure", "tau_min", "tau_max", "tau_points", "lambda2", "preset",
            "kappa", "omega_c", "temperature", "samples", "steps", "seed",
            "out", "workers")
    return {k: getattr(args, k, None) for k in keys}


def _load_config(path: str, args: argparse.Namespace):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, _overrides_from(args))


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="holonomy-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sweep from a config file")
    p_run.add_argument("config")
    _add_override_flags(p_run)

    p_rev = sub.add_parser("revivals", help="closed-form revival durations")
    p_rev.add_argument("--k-max", dest="k_max", type=int, required=True)
    p_rev.add_argument("--n", type=int, default=1)
    p_rev.add_argument("--out")

    p_opt = sub.add_parser("optimal-report",
                           help="fidelity peak nearest the first revival")
    p_opt.add_argument("config")
    _add_override_flags(p_opt)

    p_rates = sub.add_parser("rates", help="rate table from an Ohmic bath")
    p_rates.add_argument("--kappa", type=float, required=True)
    p_rates.add_argument("--omega-c", dest="omega_c", type=float, required=True)
    p_rates.add_argument("--temperature", type=float, required=True)
    p_rates.add_argument("--out")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load_config(args.config, args)
            path = run_experiment(cfg)
            print(f"holonomy-lab: wrote {path}", file=sys.stderr)
        elif args.command == "revivals":
            if args.k_max < 1 or args.n < 1:
                raise ConfigError("k-max and n must be positive")
            times = revival_times(args.k_max, args.n)
            lines = ["k,omega_tau_star"]
            lines += [f"{k},%.12g" % t for k, t in enumerate(times, start=1)]
            _emit("\n".join(lines) + "\n", args.out)
        elif args.command == "optimal-report":
            cfg = _load_config(args.config, args)
            report = format_report(optimal_time_report(cfg))
            _emit(report, cfg.out if cfg.out != "experiment.csv" else None)
        else:
            bath = OhmicBath(args.kappa, args.omega_c, args.temperature)
            table = rates_from_bath(bath)
            lines = ["alpha,beta,gamma,delta"]
            lines += [f"{a},{b},%.12g,%.12g" % (table.gamma_of(a, b), table.delta_of(a, b))
                      for a in LEVELS for b in LEVELS]
            _emit("\n".join(lines) + "\n", args.out)
    except (ConfigError, ValidationError) as exc:
        print(f"holonomy-lab: config error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationDivergedError, QuadratureConvergenceError) as exc:
        print(f"holonomy-lab: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
