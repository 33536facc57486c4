"""Command-line entry point: render one figure from one CSV.

Exit codes: 0 success, 1 bad usage, 2 unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .figures import FIGURE_KINDS, FigureSpec, InputDataError, render


class UsageError(Exception):
    """Raised for bad command lines in place of argparse's sys.exit."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="quasismc-plots", allow_abbrev=False,
                     description="Render a figure from an experiment CSV.")
    parser.add_argument("--in", dest="input_path", required=True,
                        help="input CSV file")
    parser.add_argument("--kind", choices=FIGURE_KINDS, required=True,
                        help="figure kind")
    parser.add_argument("--out", dest="output_path", required=True,
                        help="output image path; the suffix picks the format")
    parser.add_argument("--log-y", action="store_true",
                        help="log-scale the value axis (line figures only)")
    parser.add_argument("--raster", action="store_true",
                        help="write PNG instead of SVG when --out has no suffix")
    return parser


def parse_spec(argv: Optional[Sequence[str]] = None) -> FigureSpec:
    """Turn a command line into a FigureSpec, defaulting to vector output."""
    args = _build_parser().parse_args(argv)
    output = Path(args.output_path)
    if not output.suffix:
        output = output.with_suffix(".png" if args.raster else ".svg")
    return FigureSpec(input_path=Path(args.input_path), kind=args.kind,
                      output_path=output, log_y=args.log_y)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        spec = parse_spec(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        render(spec)
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
