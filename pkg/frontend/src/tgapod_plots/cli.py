"""Command-line figure rendering.

`plot_trace trace.csv -o fig.svg` renders the indicator/error figure and
reports the number of marker glyphs it drew; with `--compare` it renders
the method-comparison figure instead (one error curve per file).
`summarize_runs summary.csv` prints the summary table with every field
verbatim.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from tgapod_plots.figures import plot_indicator_vs_error, plot_method_comparison
from tgapod_plots.traces import load_trace, summarize


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot_trace", description=__doc__)
    parser.add_argument("trace", help="error-trace CSV produced by the solver")
    parser.add_argument("--compare", nargs="*", default=[], help="additional traces to overlay")
    parser.add_argument("-o", "--out", required=True, help="output figure (format by extension)")
    args = parser.parse_args(argv)

    try:
        primary = load_trace(args.trace)
        if args.compare:
            others = [load_trace(path) for path in args.compare]
            labels = [Path(args.trace).stem] + [Path(p).stem for p in args.compare]
            meta = plot_method_comparison([primary] + others, labels, args.out)
            print(f"series: {meta['series']}")
        else:
            meta = plot_indicator_vs_error(primary, args.out)
            print(f"markers: {meta['markers']}")
            print(f"series: {meta['series']}")
    except (OSError, ValueError) as exc:
        print(f"plot_trace: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


def summarize_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="summarize_runs")
    parser.add_argument("summary", help="summary.csv produced by the solver")
    args = parser.parse_args(argv)
    try:
        print(summarize(args.summary))
    except (OSError, ValueError) as exc:
        print(f"summarize_runs: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
