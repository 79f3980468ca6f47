"""Command line: render_figures <kind> <csv...> -o out.png [--logx ...]."""
from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureSpec, SchemaError, render


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render a figure from bornlab experiment CSV logs.",
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("csv", nargs="+", help="input CSV file(s)")
    parser.add_argument("-o", "--output", required=True, help="output image path")
    parser.add_argument("--logx", action=argparse.BooleanOptionalAction, default=None,
                        help="force log/linear x axis (default: per-kind)")
    parser.add_argument("--logy", action=argparse.BooleanOptionalAction, default=None,
                        help="force log/linear y axis (default: per-kind)")
    args = parser.parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        csv_paths=tuple(args.csv),
        output_path=args.output,
        logx=args.logx,
        logy=args.logy,
    )
    try:
        path = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        sys.exit(1)
    print(path)


if __name__ == "__main__":
    main()
