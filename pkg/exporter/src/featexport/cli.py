"""featexport CLI: dump backbone features for the classification pipeline."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backbones import BACKBONES, STAGES
from .export import ExportSpec, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="featexport")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="extract stage features for a folder "
                                      "of class-labelled images")
    p.add_argument("--backbone", required=True, choices=BACKBONES)
    p.add_argument("--stage", required=True, choices=STAGES)
    p.add_argument("--images", required=True,
                   help="directory with one subfolder per class")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pool", action="store_true",
                   help="store pooled [C] vectors instead of [C,H,W] maps")
    p.add_argument("--no-pretrained", action="store_true",
                   help="random-initialized weights (offline/testing only)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExportSpec(backbone=args.backbone, stage=args.stage,
                      images=Path(args.images), out=Path(args.out),
                      pool=args.pool, pretrained=not args.no_pretrained)
    try:
        export(spec)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
