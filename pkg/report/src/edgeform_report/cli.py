"""Command-line entry point: render figures for a batch of simulator CSVs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import render_all
from .schema import SchemaError, parse_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render formation and funnel figures from simulation CSV logs")
    parser.add_argument("csvs", nargs="+", metavar="file.csv",
                        help="simulator CSV logs")
    parser.add_argument("--out", required=True, help="output image directory")
    parser.add_argument("--kind", choices=("formation", "funnel", "both"),
                        default="both")
    parser.add_argument("--format", choices=("png", "svg"), default="png",
                        dest="image_format")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out)
    status = 0
    for source in args.csvs:
        try:
            table = parse_csv(source)
            written = render_all(table, out_dir, args.kind, args.image_format)
        except (SchemaError, OSError) as exc:
            print(f"error: {source}: {exc}", file=sys.stderr)
            status = 1
            continue
        for path in written:
            print(f"{source} -> {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
