"""Command-line entry point.

    marketsim run --config exp.json --out results/ [--mu 120,60] [--seeds 5]
    marketsim sweep --mu 120,100,60 --out results/          # default cells
    marketsim defaults > exp.json

Exit status: 0 on success, 2 on a configuration error, 1 on a runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .core import ConfigError
from .harness import ExperimentSpec, default_jobs, load_sweep_spec, run_experiment


def _mu_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError("mu", f"expected a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise ConfigError("mu", "empty list")
    return values


def _progress(done: int, total: int) -> None:
    if done == total or done % 20 == 0:
        print(f"\r{done}/{total} runs", end="\n" if done == total else "",
              file=sys.stderr, flush=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketsim",
        description="Market-based CPU allocation simulator: utility-versus-load sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool) -> None:
        p.add_argument("--config", required=config_required,
                       help="JSON experiment description")
        p.add_argument("--out", help="output directory for runs.csv and agg.csv")
        p.add_argument("--mu", help="override the interarrival sweep, e.g. 120,60,20")
        p.add_argument("--seeds", type=int, help="use seeds 1..N")
        p.add_argument("--jobs", type=int,
                       help="worker processes (default: $MARKETSIM_JOBS or all cores)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    common(sub.add_parser("run", help="run the experiment described by --config"), True)
    common(sub.add_parser("sweep", help="load sweep; defaults to the obedient/strategic/market cells"), False)
    sub.add_parser("defaults", help="print the default load-sweep experiment as JSON")
    return parser


def load_spec(args: argparse.Namespace) -> ExperimentSpec:
    spec = ExperimentSpec.load(args.config) if args.config else load_sweep_spec()
    changes = {}
    if args.mu:
        changes["sweep"] = _mu_list(args.mu)
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("seeds", "must be at least 1")
        changes["seeds"] = list(range(1, args.seeds + 1))
    if args.out:
        changes["output"] = args.out
    if changes:
        spec = replace(spec, **changes)
    if spec.output is None:
        raise ConfigError("output", "no output directory (use --out or the config's 'output')")
    return spec


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        json.dump(load_sweep_spec().to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    try:
        spec = load_spec(args)
        jobs = args.jobs if args.jobs is not None else default_jobs()
        if jobs < 1:
            raise ConfigError("jobs", "must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return 2

    try:
        result = run_experiment(spec, jobs=jobs, progress=None if args.quiet else _progress)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        print(f"wrote {len(result.rows)} runs and {len(result.agg)} aggregate rows "
              f"to {spec.output}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
