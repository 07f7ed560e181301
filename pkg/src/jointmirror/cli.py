"""Command line front end.

Two modes: run the procedure on a matrix file, or run a named
replication study.  Exit codes: 0 success, 2 input data error, 3
configuration error.  The JM_LOG environment variable (debug, info,
warning, error) controls verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .engine import JMConfig, run_directional, run_jm
from .io import (
    InputDataError,
    ingest,
    write_directional_results_csv,
    write_directional_trajectory_csv,
    write_metadata_json,
    write_results_csv,
    write_summary_csv,
    write_trajectory_csv,
)
from .regions import MaskingScheme
from .simulate import PRESET_NAMES, run_replications

log = logging.getLogger("jointmirror")

DEFAULT_SCHEME_FLAG = "0.5,0.5,1"


class ConfigError(Exception):
    """Bad flag combination or parameter (exit code 3)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="jointmirror",
        description="Joint mirror multiple testing across K experiments.",
    )
    parser.add_argument("--input", help="delimited matrix file, one feature per row")
    parser.add_argument(
        "--simulate",
        metavar="PRESET[:k=v,...]",
        help=f"replication study on a named generator; presets: {', '.join(PRESET_NAMES)}",
    )
    parser.add_argument("--mode", choices=("pvalue", "zvalue"), default="pvalue",
                        help="how to interpret --input (default pvalue)")
    parser.add_argument("--variant", choices=("max", "product", "empty"), default=None,
                        help="partial order guiding the reveal sequence (default product)")
    parser.add_argument("--q", type=float, required=True, help="target error level in (0, 1)")
    parser.add_argument("--scheme", default=DEFAULT_SCHEME_FLAG, metavar="ALPHA,LAMBDA,NU",
                        help="masking scheme parameters (default 0.5,0.5,1)")
    parser.add_argument("--seed", type=int, default=0, help="tie-break and generator seed")
    parser.add_argument("--bandwidth", default="silverman", metavar="silverman|fixed:PATH",
                        help="kernel bandwidth rule or a fixed K x K CSV matrix")
    parser.add_argument("--out-dir", required=True, help="directory for run artifacts")
    parser.add_argument("--reps", type=int, default=None, help="replications (simulate mode)")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for replications")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def _parse_scheme(text: str) -> MaskingScheme:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--scheme needs three comma-separated numbers, got {text!r}")
    try:
        alpha, lam, nu = (float(v) for v in parts)
    except ValueError:
        raise ConfigError(f"--scheme values must be numeric, got {text!r}")
    try:
        return MaskingScheme(alpha, lam, nu)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _parse_bandwidth(text: str):
    if text == "silverman":
        return "silverman"
    if text.startswith("fixed:"):
        path = text[len("fixed:"):]
        try:
            mat = np.loadtxt(path, delimiter=",", ndmin=2)
        except OSError as exc:
            raise ConfigError(f"cannot read bandwidth matrix {path}: {exc}")
        except ValueError as exc:
            raise ConfigError(f"cannot parse bandwidth matrix {path}: {exc}")
        return mat
    raise ConfigError(f"--bandwidth must be 'silverman' or 'fixed:PATH', got {text!r}")


def _parse_simulate_spec(text: str) -> tuple[str, dict]:
    name, _, tail = text.partition(":")
    overrides: dict = {}
    if tail:
        for item in tail.split(","):
            key, sep, value = item.partition("=")
            if not sep or not key:
                raise ConfigError(f"bad override {item!r} in --simulate (want key=value)")
            try:
                overrides[key] = float(value)
            except ValueError:
                raise ConfigError(f"override {key!r} needs a numeric value, got {value!r}")
    return name, overrides


def _run_single(args, out_dir: Path) -> dict:
    scheme = _parse_scheme(args.scheme)
    bandwidth = _parse_bandwidth(args.bandwidth)
    variant = args.variant or "product"
    if args.mode == "zvalue":
        if args.variant is not None:
            raise ConfigError("--variant does not apply to zvalue mode")
        if args.scheme != DEFAULT_SCHEME_FLAG:
            raise ConfigError("--scheme does not apply to zvalue mode")
        if args.bandwidth != "silverman":
            raise ConfigError("--bandwidth does not apply to zvalue mode")
    matrix = ingest(args.input, args.mode)
    m, k_dim = matrix.shape
    if not isinstance(bandwidth, str) and bandwidth.shape[0] != k_dim:
        raise ConfigError(
            f"bandwidth matrix is {bandwidth.shape[0]} x {bandwidth.shape[1]} "
            f"but the input has {k_dim} columns"
        )
    start = time.perf_counter()
    if args.mode == "pvalue":
        try:
            config = JMConfig(q=args.q, variant=variant, scheme=scheme,
                              seed=args.seed, bandwidth=bandwidth)
        except ValueError as exc:
            raise ConfigError(str(exc))
        result = run_jm(matrix, config)
        wall = time.perf_counter() - start
        write_results_csv(out_dir / "results.csv", result, k_dim)
        write_trajectory_csv(out_dir / "trajectory.csv", result)
        return {
            "mode": "pvalue", "variant": variant,
            "scheme": [scheme.alpha, scheme.lam, scheme.nu],
            "bandwidth": bandwidth if isinstance(bandwidth, str) else bandwidth.tolist(),
            "seed": args.seed, "n_rejected": int(len(result.rejected)),
            "terminal_fdp_hat": result.terminal_fdp_hat,
            "steps": int(result.trajectory.shape[0] - 1), "wall_time_s": wall,
        }
    try:
        result = run_directional(matrix, args.q)
    except ValueError as exc:
        raise ConfigError(str(exc))
    wall = time.perf_counter() - start
    write_directional_results_csv(out_dir / "results.csv", result, matrix)
    write_directional_trajectory_csv(out_dir / "trajectory.csv", result)
    return {
        "mode": "zvalue",
        "threshold": result.threshold if np.isfinite(result.threshold) else "none",
        "n_signed": int((result.signs != 0).sum()), "wall_time_s": wall,
    }


def _run_study(args, out_dir: Path) -> dict:
    scheme = _parse_scheme(args.scheme)
    bandwidth = _parse_bandwidth(args.bandwidth)
    preset, overrides = _parse_simulate_spec(args.simulate)
    reps = 1 if args.reps is None else args.reps
    start = time.perf_counter()
    try:
        rows = run_replications(
            preset, q=args.q, reps=reps, seed=args.seed, threads=args.threads,
            scheme=scheme, bandwidth=bandwidth, overrides=overrides,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    wall = time.perf_counter() - start
    write_summary_csv(out_dir / "summary.csv", rows)
    return {
        "mode": "simulate", "preset": preset, "overrides": overrides,
        "reps": reps, "threads": args.threads,
        "scheme": [scheme.alpha, scheme.lam, scheme.nu],
        "config_hash": rows[0]["config_hash"] if rows else "",
        "seed": args.seed, "wall_time_s": wall,
    }


def run(args) -> None:
    if (args.input is None) == (args.simulate is None):
        raise ConfigError("exactly one of --input or --simulate is required")
    if args.reps is not None and args.input is not None:
        raise ConfigError("--reps only applies to --simulate runs")
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    if args.reps is not None and args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    if not (0.0 < args.q < 1.0):
        raise ConfigError(f"--q must lie in (0, 1), got {args.q}")
    if args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputDataError(f"cannot create output directory {out_dir}: {exc}")
    payload = _run_single(args, out_dir) if args.input else _run_study(args, out_dir)
    payload.update({"version": __version__, "q": args.q,
                    "input": args.input or args.simulate})
    write_metadata_json(out_dir / "metadata.json", payload)


def main(argv=None) -> int:
    level = os.environ.get("JM_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        run(args)
    except ConfigError as exc:
        print(f"jointmirror: configuration error: {exc}", file=sys.stderr)
        return 3
    except InputDataError as exc:
        print(f"jointmirror: input error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"jointmirror: input error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"jointmirror: configuration error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
