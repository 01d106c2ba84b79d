"""Command-line entry point.

Subcommands:

* ``run --config FILE [--seed N] [--out DIR] [--replicas N] [--threads N]
  [--formats csv,json,svg]`` executes one experiment and emits results.
* ``report RESULT.json [--format csv|json|svg] [--out DIR]`` re-emits an
  artifact from a stored result (the CSV sibling supplies the rows).
* ``list-systems`` prints the supported systems, observations, encoders
  and experiment kinds.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
``ORBITMATCH_THREADS`` is the fallback for ``--threads``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .errors import ConfigInvalid, OrbitmatchError
from .experiments import KINDS, ExperimentResult, run
from .reporting import (
    config_from_dict,
    load_config,
    read_csv_rows,
    report,
    result_label,
    write_svg,
)

_SYSTEMS = (
    ("mtimes-mod1", "m-ary expanding interval map, m >= 2 (Lebesgue)"),
    ("beta", "beta-expanding interval map, beta > 1 (exact a.c. density)"),
    ("gauss", "Gauss continued-fraction map (density 1/((1+x) log 2))"),
    ("piecewise-doubling", "countable-branch doubling map (Lebesgue)"),
    ("torus-expanding", "coordinatewise expanding N-torus map (Lebesgue)"),
    ("piecewise-linear", "custom piecewise linear interval map (driver use)"),
    ("skew-2x-3x", "non-i.i.d. random composition of 2x and 3x circle maps"),
    ("skew-product", "general skew product: base driver + threshold fibers"),
    ("markov", "irreducible aperiodic Markov chain (matrix rows)"),
    ("bernoulli", "i.i.d. letters with probability vector p"),
)

_OBSERVATIONS = (
    ("identity", "return the state unchanged"),
    ("project", "keep the listed coordinates"),
    ("affine", "scale*x + offset per coordinate, clamped to [0, 1)"),
)

_ENCODERS = (
    ("identity", "leave sequences unchanged"),
    ("letter-repetition", "repeat letter a exactly weights[a] times"),
    ("block-substitution", "substitute each letter by a fixed word"),
)


def _resolve_threads(value) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("ORBITMATCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigInvalid(f"ORBITMATCH_THREADS={env!r} is not an integer")
    return 1


def _cmd_run(args) -> int:
    if not os.path.exists(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = args.out
        if args.replicas is not None:
            overrides["replicas"] = args.replicas
        if overrides:
            config = dataclasses.replace(config, **overrides)
        threads = _resolve_threads(args.threads)
        formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run(config, threads=threads)
        written = report(result, config.out, formats)
    except OrbitmatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    theory = "n/a" if result.theory is None else f"{result.theory:.6g}"
    print(
        f"{result_label(config)}: slope {result.slope:.6g} vs theory {theory} "
        f"({len(result.rows)} rows, {result.runtime_seconds:.2f}s)"
    )
    for path in written:
        print(f"  wrote {path}")
    return 0


def _cmd_report(args) -> int:
    if not os.path.exists(args.result):
        print(f"error: result file not found: {args.result}", file=sys.stderr)
        return 2
    try:
        with open(args.result) as fh:
            summary = json.load(fh)
        config = config_from_dict(summary["config"])
    except (json.JSONDecodeError, KeyError, ConfigInvalid) as exc:
        print(f"error: unreadable result file: {exc}", file=sys.stderr)
        return 2
    stem = args.result[: -len(".json")] if args.result.endswith(".json") else args.result
    csv_path = stem + ".csv"
    rows = read_csv_rows(csv_path) if os.path.exists(csv_path) else []
    result = ExperimentResult(
        config=config,
        rows=rows,
        per_n=summary.get("per_n", []),
        slope=summary.get("slope", float("nan")),
        intercept=summary.get("intercept", 0.0),
        theory=summary.get("theory"),
        abs_error=summary.get("abs_error"),
        rel_error=summary.get("rel_error"),
        degenerate_rows=summary.get("degenerate_rows", 0),
    )
    out_dir = args.out or (os.path.dirname(args.result) or ".")
    try:
        if args.format == "svg":
            # regenerate straight from the stored per-window summary
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, result_label(config) + ".svg")
            write_svg(result, path)
            written = [path]
        else:
            written = report(result, out_dir, (args.format,))
    except OrbitmatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"  wrote {path}")
    return 0


def _cmd_list_systems() -> int:
    print("experiment kinds:")
    for kind in KINDS:
        print(f"  {kind}")
    print("\nsystems ([system] kind = ...):")
    for name, desc in _SYSTEMS:
        print(f"  {name:20s} {desc}")
    print("\nobservations ([observation] kind = ...):")
    for name, desc in _OBSERVATIONS:
        print(f"  {name:20s} {desc}")
    print("\nencoders ([encoder] kind = ...):")
    for name, desc in _ENCODERS:
        print(f"  {name:20s} {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitmatch",
        description="orbit shortest-distance and sequence-matching experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment from a TOML config")
    run_p.add_argument("--config", required=True, help="path to the TOML config")
    run_p.add_argument("--seed", type=int, help="override the config seed")
    run_p.add_argument("--out", help="override the output directory")
    run_p.add_argument("--replicas", type=int, help="override the replica count")
    run_p.add_argument("--threads", type=int, help="worker processes (default 1)")
    run_p.add_argument(
        "--formats", default="csv,json,svg", help="comma-separated output formats"
    )

    rep_p = sub.add_parser("report", help="re-emit artifacts from a stored result")
    rep_p.add_argument("result", help="path to a result JSON")
    rep_p.add_argument("--format", default="svg", choices=("csv", "json", "svg"))
    rep_p.add_argument("--out", help="output directory (default: alongside input)")

    sub.add_parser("list-systems", help="print supported systems and kinds")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "report":
        return _cmd_report(args)
    if args.command == "list-systems":
        return _cmd_list_systems()
    return 2  # unreachable with required=True


if __name__ == "__main__":
    sys.exit(main())
