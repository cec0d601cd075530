"""Batch command-line interface.

Subcommands:
    run <spec-file>           execute a sweep experiment, write CSVs
    beampattern <solution>    emit a (degrees, dB) beampattern table
    verify <solution>         audit a solution file against its constraints

``covert-isac run`` accepts an experiment spec in the JSON schema documented
in :mod:`covertisac.harness`; solution files are produced by
:func:`covertisac.harness.save_solution` (see the ``solve`` demo script).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness


def _cmd_run(args) -> int:
    spec = harness.ExperimentSpec.from_file(args.spec)
    if args.output_dir:
        spec.output_dir = args.output_dir
    if args.seed_base is not None:
        spec.seed_base = args.seed_base

    def progress(done, total):
        print(f"\r{done}/{total} runs", end="", file=sys.stderr, flush=True)

    result = harness.run_experiment(spec, workers=args.workers,
                                    progress=None if args.workers > 1 else progress)
    if args.workers <= 1:
        print(file=sys.stderr)
    print(f"wrote {result['runs_csv']}")
    print(f"wrote {result['summary_csv']}")
    for row in result["summary"]:
        print(f"  {row['sweep_value']:>10g}  {row['mode']:<18} "
              f"n={row['n_feasible']}/{row['n_total']}  "
              f"mean covert rate {row['mean_covert_rate']:.4f} "
              f"+- {row['stderr_covert_rate']:.4f}")
    return 0


def _cmd_beampattern(args) -> int:
    solution, _, _ = harness.load_solution(args.solution)
    out = args.output or (Path(args.solution).stem + "_beampattern.txt")
    harness.emit_beampattern(solution, out, resolution_deg=args.resolution)
    print(f"wrote {out}")
    return 0


def _cmd_verify(args) -> int:
    solution, channels, config = harness.load_solution(args.solution)
    report = harness.verify_solution(solution, channels, config)
    print(report)
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covert-isac",
        description="Covert-rate maximization experiments for an "
                    "active-RIS-aided NOMA-ISAC system")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sweep experiment from a spec file")
    p_run.add_argument("spec", help="experiment spec (JSON)")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--seed-base", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_bp = sub.add_parser("beampattern", help="emit a beampattern table")
    p_bp.add_argument("solution", help="solution file (JSON)")
    p_bp.add_argument("--output", default=None)
    p_bp.add_argument("--resolution", type=float, default=0.5,
                      help="grid step in degrees")
    p_bp.set_defaults(func=_cmd_beampattern)

    p_ver = sub.add_parser("verify", help="audit a solution file")
    p_ver.add_argument("solution", help="solution file (JSON)")
    p_ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
