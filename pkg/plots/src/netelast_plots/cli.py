"""Command line figure rendering.

Usage: netelast-plots <kind> --csv results/convergence.csv --out fig.png
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import PlotDataError
from .figures import FIGURES, render

_HELP = {
    "convergence": "L2 gaps between lattice runs and the limit system",
    "tensor-error": "effective tensor error over the h/eps ladder",
    "energy": "physical and compensated energy traces of one run",
    "kernel": "weak convergence gaps of the empirical kernels",
    "snapshot-slice": "displacement quiver on one grid plane",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netelast-plots",
        description="render figures from netelast result CSVs",
    )
    sub = parser.add_subparsers(dest="kind", required=True, metavar="kind")
    for kind in FIGURES:
        p = sub.add_parser(kind, help=_HELP[kind])
        p.add_argument("--csv", type=Path, required=True, help="input artifact")
        p.add_argument("--out", type=Path, required=True, help="output image path")
        p.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        out = render(args.kind, args.csv, args.out, dpi=args.dpi)
    except (PlotDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
