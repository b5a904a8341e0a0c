"""Command line entry point.

Usage: netelast <subcommand> --config settings.cfg --out results/

Every subcommand reads one flat key=value config (defaults apply when
--config is omitted), writes its artifacts under --out, prints a short
verdict summary, and exits 0 exactly when every verdict passed.  Bad
configuration or solver breakdown exits 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigurationError, DomainError, ProbeError, SolverError
from .harness import RUNNERS

_HELP = {
    "lattice-info": "build one lattice and report mesh quality numbers",
    "bonds-info": "count both bond families and their stiffness range",
    "simulate": "integrate the particle system and write energy traces",
    "stationary": "solve the damped stationary problem at one parameter",
    "meso-tensor": "extract effective tensors over a ratio ladder",
    "continuum": "integrate the limit system on a grid",
    "converge": "compare lattice runs against the limit system",
    "korn-check": "lower bound the rigidity constant per spacing",
    "kernel-check": "pair both empirical kernels against their limits",
    "diagnostics": "run every verification probe in one pass",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netelast",
        description="homogenization toolkit for spring networks with weak long-range coupling",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, blurb in _HELP.items():
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", type=Path, default=None, help="key=value settings file")
        p.add_argument("--out", type=Path, default=Path("out"), help="artifact directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--seed", type=int, default=0, help="seed for iterative starts")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        result = RUNNERS[args.command](
            cfg, args.out, threads=args.threads, seed=args.seed
        )
    except (ConfigurationError, DomainError, ProbeError, SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"{args.command}: config {cfg.hash}, artifacts in {result.out_dir}")
    for name in result.artifacts:
        print(f"  wrote {name}")
    for name, ok in result.verdicts.items():
        print(f"  verdict {name}: {'pass' if ok else 'FAIL'}")
    print(f"overall: {'pass' if result.passed else 'FAIL'}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
