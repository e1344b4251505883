"""Command line entry point for regenerating the figures.

Two subcommands, one per figure:

    mlmc-figures level-stats --input euler=euler.csv \
        --input milstein=milstein.csv --output fig1.png
    mlmc-figures cost-sweep --input mlmc=sweep.csv \
        --normalization ref.txt --output fig2.png

Exit codes: 0 ok, 2 bad arguments, 3 unreadable or malformed input data.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .figures import FigureDataError, FigureSpec, plot_cost_sweep, \
    plot_level_stats

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("mlmcfigures")


def parse_inputs(pairs: list[str]) -> dict[str, str]:
    inputs = {}
    for pair in pairs:
        label, sep, path = pair.partition("=")
        if not sep or not label or not path:
            raise ValueError(f"--input must be label=path, got {pair!r}")
        if label in inputs:
            raise ValueError(f"duplicate input label {label!r}")
        inputs[label] = path
    return inputs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlmc-figures",
        description="Regenerate rate and cost figures from engine CSVs.")
    sub = parser.add_subparsers(dest="figure", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", required=True,
                        metavar="LABEL=CSV",
                        help="labelled input table; repeatable")
    common.add_argument("--output", required=True,
                        help="image path (format from the extension)")
    common.add_argument("--verbose", action="store_true")

    ls = sub.add_parser("level-stats", parents=[common],
                        help="per-level statistics panels")
    ls.add_argument("--level-range", nargs=2, type=int, metavar=("LO", "HI"),
                    help="restrict plotted levels to [LO, HI]")

    cs = sub.add_parser("cost-sweep", parents=[common],
                        help="cost against tolerance")
    cs.add_argument("--normalization", required=True,
                    help="sidecar file holding the reference value")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        inputs = parse_inputs(args.input)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG

    try:
        if args.figure == "level-stats":
            spec = FigureSpec(
                inputs=inputs, output=args.output,
                level_range=tuple(args.level_range)
                if args.level_range else None)
            out = plot_level_stats(spec)
        else:
            spec = FigureSpec(inputs=inputs, output=args.output,
                              normalization=args.normalization)
            out = plot_cost_sweep(spec)
    except FigureDataError as exc:
        log.error("%s", exc)
        return EXIT_IO
    log.info("wrote %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
