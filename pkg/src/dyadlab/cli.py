"""Command line: ``dyadlab run|report|validate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config, serialize_config
from .runner import ReportError, RunError, report_command, resolve_output_dir, run_command


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid and write CSVs, manifest and summary")
    run.add_argument("config", help="JSON config or a manifest.json from an earlier run")
    run.add_argument("--seed", type=int, help="override grid.base_seed")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--out", help="output directory (else config output_dir, $DYADLAB_OUT, default)")
    run.add_argument("--trajectories", action="store_true",
                     help="write per-step poses (continuous mode)")
    run.add_argument("--overwrite", action="store_true", help="replace a non-empty output directory")
    run.add_argument("--report", action="store_true", help="also write the report after the run")
    run.add_argument("-q", "--quiet", action="store_true")

    report = sub.add_parser("report", help="summary JSON and SVG plots for a run directory")
    report.add_argument("run_dir")
    report.add_argument("--out", help="report directory (default <run_dir>/report)")
    report.add_argument("--no-plots", action="store_true")

    validate = sub.add_parser("validate", help="check a config and print the resolved version")
    validate.add_argument("config")
    return parser


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = load_config(args.config)
            print(json.dumps(serialize_config(config), indent=2, sort_keys=True))
            return 0

        if args.command == "run":
            config = load_config(args.config)
            config = config.with_overrides(
                seed=args.seed, emit_trajectories=True if args.trajectories else None
            )
            if config.emit_trajectories and config.mode != "continuous":
                _log("note: trajectories exist only in continuous mode; ignoring")
            out = resolve_output_dir(args.out, config)
            run_dir = run_command(config, out, jobs=args.jobs, base_dir=Path(args.config).parent,
                                  overwrite=args.overwrite, log=None if args.quiet else _log)
            if args.report:
                report_command(run_dir)
            print(run_dir)
            return 0

        if args.command == "report":
            out = report_command(args.run_dir, args.out, False if args.no_plots else None)
            print(out)
            return 0
    except ConfigError as exc:
        _log(str(exc))
        return 2
    except FileNotFoundError as exc:
        _log(f"error: {exc}")
        return 2
    except (RunError, ReportError) as exc:
        _log(f"error: {exc}")
        return 1
    except KeyboardInterrupt:
        _log("interrupted; partial outputs removed")
        return 130
    return 1


if __name__ == "__main__":
    sys.exit(main())
