"""Command-line entry point.

Subcommands: ingest, split, train, select, sweep, report, all.
Exit codes: 0 ok, 2 config error, 3 data error, 4 stage-prerequisite error.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import ConfigError, load_config

_STAGES = {
    "ingest": pipeline.cmd_ingest,
    "split": pipeline.cmd_split,
    "train": pipeline.cmd_train,
    "select": pipeline.cmd_select,
    "sweep": pipeline.cmd_sweep,
    "report": pipeline.cmd_report,
    "all": pipeline.cmd_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featopt",
        description="Deep-feature selection and classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--jobs", type=int, help="parallel sweep workers")
        p.add_argument("--fractions",
                       help="comma-separated subset fractions (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("out", "seed", "jobs", "fractions")
                 if getattr(args, k) is not None}
    try:
        cfg = load_config(args.config, overrides)
        _STAGES[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except pipeline.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except pipeline.PrereqError as exc:
        print(f"prerequisite error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
