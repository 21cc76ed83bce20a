"""Command-line entry point.

Subcommands: pareto-z, pareto-j, detect-sim, rcs, jpeg, profile-report.
Each reads an optional JSON config (--config), applies flag overrides,
runs the experiment, and writes the results table, a manifest, and
(with --plot) a rendered figure into --out.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 internal
invariant violation. Logging goes to stderr only; RDD_LAB_LOG sets the
level (debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import EXPERIMENTS, ExperimentConfig
from .errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

logger = logging.getLogger("rddlab")


def _setup_logging():
    level_name = os.environ.get("RDD_LAB_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rddlab",
        description="Rate-distortion-detectability trade-off experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="root RNG seed (overrides config)")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for grid cells")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="results table format")
        p.add_argument("--plot", action="store_true",
                       help="also render a PNG figure next to the table")
        p.add_argument("--delta", type=_float_list, metavar="D1,D2,...",
                       help="distortion grid override")
        p.add_argument("--omega", type=_float_list, metavar="W1,W2,...",
                       help="detectability grid override")
        p.add_argument("--alpha", type=float, help="white anomaly energy override")
        p.add_argument("--n-samples", type=int, help="Monte-Carlo sample count override")
        if name == "rcs":
            p.add_argument("--m-counts", type=_int_list, metavar="M1,M2,...",
                           help="subset sizes override")
        if name == "jpeg":
            p.add_argument("--eta", type=float, help="anomaly mixing weight override")
        if name == "profile-report":
            p.add_argument("--constraint", choices=("z", "j"),
                           help="which detectability constraint to profile")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.delta is not None:
        if args.experiment == "profile-report":
            if len(args.delta) != 1:
                raise ConfigError("profile-report takes a single --delta value")
            out["delta"] = args.delta[0]
        else:
            out["delta_grid"] = args.delta
    if args.omega is not None:
        out["omega_grid"] = args.omega
    if args.alpha is not None:
        out["anomaly"] = {"kind": "white", "alpha": args.alpha}
        out["alpha"] = args.alpha
    if getattr(args, "n_samples", None) is not None:
        out["n_samples"] = args.n_samples
        out["n_scored_blocks"] = args.n_samples
    if getattr(args, "m_counts", None) is not None:
        out["m_counts"] = args.m_counts
    if getattr(args, "eta", None) is not None:
        out["eta"] = args.eta
    if getattr(args, "constraint", None) is not None:
        out["constraint"] = args.constraint
    return out


def _error_report(kind: str, message: str):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = ExperimentConfig.load(args.experiment, args.config, _overrides(args))
    except ConfigError as exc:
        _error_report("config", str(exc))
        return EXIT_CONFIG

    from . import experiments

    try:
        artifacts = experiments.run(
            config, args.out, fmt=args.format, jobs=args.jobs, plot=args.plot
        )
    except ConfigError as exc:
        _error_report("config", str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _error_report("io", str(exc))
        return EXIT_IO
    except Exception as exc:  # internal invariant violation
        logger.exception("internal error")
        _error_report("internal", f"{type(exc).__name__}: {exc}")
        return EXIT_INTERNAL
    logger.info("artifacts: %s", artifacts)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
