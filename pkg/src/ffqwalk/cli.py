"""Command-line entry point.

Every subcommand prints a JSON summary on stdout. Failures print a JSON error
record on stderr and exit nonzero (2 for configuration problems, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import harness, snapshots
from .analysis import fit_q_gaussian, residual_spectrum, running_average
from .errors import ConfigurationError, FFQWalkError

log = logging.getLogger("ffqwalk")


def _clean(obj):
    """Make floats JSON-safe (NaN/inf become null)."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(doc: dict):
    json.dump(_clean(doc), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--steps", type=int)
    p.add_argument("--initial", help="paper_default | single_site | beta_gamma:B,G | file:PATH")
    p.add_argument("--epsilon-trunc", type=float)
    p.add_argument("--per-decade", type=int)
    p.add_argument("--window", type=int, help="odd smoothing window before fitting")
    p.add_argument("--q-fixed", type=float)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--snapshots", action="store_true", default=None)
    p.add_argument("--output-dir")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--halt-at", type=int, help="stop at the first checkpoint at or beyond this step")


def _config(args, model: str) -> harness.RunConfig:
    keys = ("steps", "theta", "initial", "epsilon_trunc", "per_decade", "window", "q_fixed",
            "checkpoint_every", "snapshots", "output_dir", "m", "sigma0")
    overrides = {k: getattr(args, k, None) for k in keys}
    overrides["model"] = model
    if args.config is not None:
        return harness.RunConfig.load(args.config, **overrides)
    return harness.RunConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def _run(args, model: str):
    config = _config(args, model)
    result = harness.run_evolution(config, resume=args.resume, halt_at=args.halt_at)
    last = result.rows[-1]
    doc = {"model": config.model, "t": last["t"], "time": last["time"],
           "window_size": last["window_size"], "total_mass": last["total_mass"],
           "truncated_mass": last["truncated_mass"], "std": last["std"],
           "sigma_q": last["sigma_q"], "q": last["q"],
           "max_abs_ledger_error": result.ledger_max_error(),
           "output_dir": str(result.output_dir) if result.output_dir else None}
    if last["t"] == config.steps:
        series = result.series
        if len(series.samples) >= 5:
            t = series.t
            lo = t[0] if config.model in ("pme", "nlpde") else max(t[0], 10.0)
            try:
                doc["exponent"], doc["exponent_stderr"] = result.exponent(lo, t[-1])
            except FFQWalkError as exc:
                doc["exponent_error"] = str(exc)
    _emit(doc)


def cmd_walk(args):
    _run(args, "homogeneous" if args.theta is not None else "feed_forward")


def cmd_markov(args):
    _run(args, "markov")


def cmd_pme(args):
    _run(args, "nlpde" if args.nlpde else "pme")


def cmd_fit(args):
    dist = snapshots.read_distribution(args.input)
    smoothed = running_average(dist, args.window) if args.window > 1 else dist
    fit = fit_q_gaussian(smoothed, args.q_fixed)
    _emit({"input": str(args.input), "window": args.window, **fit.as_dict()})


def cmd_spectrum(args):
    dist = snapshots.read_distribution(args.input)
    fit = fit_q_gaussian(running_average(dist, args.window) if args.window > 1 else dist,
                         args.q_fixed)
    spec = residual_spectrum(dist, fit)
    if args.output is not None:
        snapshots.write_table(args.output, "spectrum",
                              {"slope": spec.slope_loglog, "slope_stderr": spec.slope_stderr},
                              ["frequency", "power"], zip(spec.frequencies, spec.power))
    _emit({"input": str(args.input), "slope": spec.slope_loglog, "slope_stderr": spec.slope_stderr,
           "band": list(spec.band), "fit": fit.as_dict()})


def cmd_sweep(args):
    result = harness.run_sweep(args.resolution, args.steps_a, args.steps_b, window=args.window,
                               epsilon_trunc=args.epsilon_trunc, workers=args.workers,
                               output_dir=args.output_dir)
    q = result.fitted_q()
    _emit({"resolution": args.resolution, "points": len(result.points),
           "fitted": int(q.size), "localized": [[p.beta, p.gamma] for p in result.localized()],
           "failed": sum(1 for p in result.points if not p.fit_ok and not p.localized),
           "median_q": float(np.median(q)) if q.size else None,
           "output_dir": args.output_dir})


def cmd_validate_pme(args):
    report = harness.run_pme_validation(args.m, decades=args.decades, sigma0=args.sigma0,
                                        output_dir=args.output_dir)
    _emit(report)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffqwalk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("walk", help="feed-forward (or, with --theta, homogeneous) quantum walk")
    _run_flags(p)
    p.add_argument("--theta", type=float, help="constant coin angle; selects the homogeneous walk")
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("markov", help="classical Markov limit of the feed-forward walk")
    _run_flags(p)
    p.set_defaults(func=cmd_markov)

    p = sub.add_parser("pme", help="porous medium equation from a self-similar profile")
    _run_flags(p)
    p.add_argument("--m", type=float, help="porosity exponent in [1, 3)")
    p.add_argument("--sigma0", type=float, help="initial profile width")
    p.add_argument("--nlpde", action="store_true", help="evolve the nonlinear density equation instead")
    p.set_defaults(func=cmd_pme)

    for name, func, text in (("fit", cmd_fit, "q-Gaussian fit of a distribution table"),
                             ("spectrum", cmd_spectrum, "power spectrum of the fit residual")):
        p = sub.add_parser(name, help=text)
        p.add_argument("input", type=Path, help="distribution, walker or markov table")
        p.add_argument("--q-fixed", type=float)
        p.add_argument("--window", type=int, default=11)
        if name == "spectrum":
            p.add_argument("--output", type=Path, help="write frequency/power table here")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="two-time q estimate over a (beta, gamma) grid")
    p.add_argument("--resolution", type=int, default=15)
    p.add_argument("--steps-a", type=int, default=100_000)
    p.add_argument("--steps-b", type=int, default=1_000_000)
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--epsilon-trunc", type=float, default=harness.DEFAULT_EPSILON_TRUNC)
    p.add_argument("--workers", type=int, help=f"defaults to ${harness.WORKERS_ENV} or the CPU count")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-pme", help="self-similarity check of the PME solver")
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--decades", type=float, default=1.0)
    p.add_argument("--sigma0", type=float, default=40.0)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_validate_pme)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FFQWalkError as exc:
        json.dump(_clean(exc.record()), sys.stderr)
        sys.stderr.write("\n")
        return 2 if isinstance(exc, ConfigurationError) else 1
    except (OSError, json.JSONDecodeError) as exc:
        json.dump({"error": "io", "type": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
