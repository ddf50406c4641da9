"""Command line front end.

Subcommands: run a config file, list registered experiments, or replay
a finished run from its manifest and confirm the tables come back
byte-identical.  Exit code 0 means every check passed, 1 means a check
or replay comparison failed, 2 means the configuration was rejected.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigurationError, FracflowError
from .experiments import list_experiments
from .runner import RunConfig, replay_run, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracflow",
        description="simulate fractional convection-diffusion ensembles "
                    "and verify their statistical identities")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("config", help="path to a JSON run config")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
    run_p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: cpu count)")
    run_p.add_argument("--out", default=None,
                       help="override the output directory")

    sub.add_parser("list", help="list registered experiments")

    rep_p = sub.add_parser("replay",
                           help="re-run from a manifest and compare tables")
    rep_p.add_argument("manifest", help="path to a manifest.json")
    rep_p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: cpu count)")
    rep_p.add_argument("--out", default=None,
                       help="write the replayed artifacts here")

    return parser


def _workers(value) -> int:
    if value is not None:
        return value
    return os.cpu_count() or 1


def _print_outcome(manifest, result):
    for line in result.summary_lines():
        print(line)
    if manifest.flagged_members:
        print(f"flagged members: {len(manifest.flagged_members)}")
    print(f"wall clock: {manifest.wall_clock_s:.2f}s")


def _cmd_run(args) -> int:
    config = RunConfig.from_file(args.config)
    if args.seed is not None:
        data = config.to_dict()
        data["seed"] = args.seed
        config = RunConfig.from_dict(data)
    manifest, result = run_experiment(config, workers=_workers(args.workers),
                                      out=args.out)
    _print_outcome(manifest, result)
    out = args.out if args.out is not None else config.out
    if out is not None:
        print(f"artifacts: {os.path.abspath(out)}")
    return 0 if manifest.passed else 1


def _cmd_list(_args) -> int:
    entries = list_experiments()
    width = max(len(name) for name, _ in entries)
    for name, statement in entries:
        print(f"{name:<{width}}  {statement}")
    return 0


def _cmd_replay(args) -> int:
    manifest, result, matches = replay_run(
        args.manifest, workers=_workers(args.workers), out=args.out)
    _print_outcome(manifest, result)
    for name in sorted(matches):
        verdict = "match" if matches[name] else "MISMATCH"
        print(f"replay {name}: {verdict}")
    if not all(matches.values()):
        print("replay produced different tables", file=sys.stderr)
        return 1
    return 0 if manifest.passed else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "list": _cmd_list,
               "replay": _cmd_replay}[args.command]
    try:
        return handler(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FracflowError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
