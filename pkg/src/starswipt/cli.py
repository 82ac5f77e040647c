"""Command line: ``starswipt run | sweep | check``.

Exit codes: 0 success, 1 usage or configuration error, 2 a solve failed
(rows are still written).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .ao import AoOptions
from .baselines import Scheme, run_baseline
from .checks import run_checks
from .config import ConfigError, load_config
from .experiments import load_sweep, run_sweep, summary_path, trial_streams, write_results
from .model import check_feasibility
from .scenario import SystemConfig, build_channels

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="starswipt", description="STAR-RIS SWIPT sum-rate optimization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="solve one seeded instance and print the report")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--scheme", default="es", help="es | equal_amplitude | conventional | without_ris")
    run.add_argument("--seed", type=int, default=0, help="seed for channels and solver")
    run.add_argument("--verbose", action="store_true", help="log each AO stage to stderr")

    sweep = sub.add_parser("sweep", help="run a sweep file and write CSV/JSONL results")
    sweep.add_argument("--sweep", required=True, help="sweep spec file")
    sweep.add_argument("--config", help="extra config file applied before the sweep file keys")
    sweep.add_argument("--out", help="output path (overrides the sweep file)")
    sweep.add_argument("--format", choices=("csv", "jsonl"), default=None)
    sweep.add_argument("--seed", type=int, help="root seed (overrides the sweep file)")
    sweep.add_argument("--trials", type=int, help="seeds per point (overrides the sweep file)")
    sweep.add_argument("--threads", type=int, default=1, help="worker processes")
    sweep.add_argument("--timing", action="store_true", help="record wall_ms (makes output run-dependent)")
    sweep.add_argument("--verbose", action="store_true")

    sub.add_parser("check", help="run the oracle and invariant self-checks")
    return parser


def _run(args):
    if args.config:
        config, options = load_config(args.config)
    else:
        config, options = SystemConfig(), AoOptions()
    options = replace(options, verbose=args.verbose or options.verbose)
    scheme = Scheme.parse(args.scheme)
    channel_rng, solver_rng = trial_streams(args.seed)
    channels = build_channels(config, channel_rng)
    report = run_baseline(scheme, channels, config, options, solver_rng)
    print(f"scheme      {scheme.value}")
    print(report.summary())
    if report.objective_trace:
        feasible = check_feasibility(channels, report.solution, config, options.feas_tol)
        print(f"violation   {feasible.worst_violation:.2e}")
    return EXIT_OK if report.status in ("converged", "max_iter") else EXIT_FAILED


def _sweep(args):
    spec = load_sweep(args.sweep, args.config)
    changes = {}
    if args.out:
        changes["output"] = args.out
    if args.seed is not None:
        changes["root_seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.timing:
        changes["record_timing"] = True
    if args.verbose:
        changes["options"] = replace(spec.options, verbose=True)
    spec = replace(spec, **changes)
    fmt = args.format or ("jsonl" if spec.output.endswith(".jsonl") else "csv")
    rows = run_sweep(spec, threads=args.threads)
    write_results(rows, spec.output, fmt)
    failed = sum(row.failed for row in rows)
    print(f"wrote {len(rows)} rows to {spec.output} (summary {summary_path(spec.output)}); {failed} failed")
    return EXIT_FAILED if failed else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "sweep":
            return _sweep(args)
        return EXIT_OK if run_checks() else EXIT_FAILED
    except (ConfigError, ValueError, OSError) as exc:
        print(f"starswipt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
