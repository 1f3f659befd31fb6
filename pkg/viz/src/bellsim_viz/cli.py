"""bellsim-viz: render figures from bellsim report files.

    bellsim-viz correlation-curve --in report.json --out curve.png
    bellsim-viz sweep --in sweep.csv --out sweep.svg
    bellsim-viz homogeneity --in report.json --out pvalues.png

Inputs are never modified.  Exit codes: 0 ok, 2 bad input or schema
mismatch, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import SchemaError, plot_correlation_curve, plot_homogeneity, plot_sweep

KINDS = {
    "correlation-curve": plot_correlation_curve,
    "sweep": plot_sweep,
    "homogeneity": plot_homogeneity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellsim-viz", description=__doc__)
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("--in", dest="input", required=True, help="report JSON or sweep CSV")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--dpi", type=int, default=150)
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    src = Path(args.input)
    if not src.exists():
        print(f"error: input not found: {src}", file=sys.stderr)
        return 2
    try:
        KINDS[args.kind](src, Path(args.out), title=args.title, dpi=args.dpi)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
