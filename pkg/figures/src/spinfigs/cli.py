"""CLI: render one figure from an experiment data file."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureJob, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinfigs", description="Render figures from corrspin CSV output"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--in", dest="input_path", type=Path, required=True, metavar="DATA_CSV")
    p.add_argument("--out", dest="output_path", type=Path, required=True, metavar="IMAGE")
    p.add_argument("--value", default="sz", help="value column (heatmap/curve)")
    p.add_argument("--x", default="t", help="curve x-axis column: t or N")
    p.add_argument("--site", type=int, default=None, help="curve: restrict to one site")
    p.add_argument("--summary", type=Path, default=None, help="summary.json for markers")
    p.add_argument("--title", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = FigureJob(
            input_path=args.input_path,
            kind=args.kind,
            output_path=args.output_path,
            value=args.value,
            x=args.x,
            site=args.site,
            summary_path=args.summary,
            title=args.title,
        )
        out = render(job)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
