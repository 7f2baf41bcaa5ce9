"""The ``plot`` command: render figures from a trace directory."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render convergence curves, image grids, or transport-"
        "plan heatmaps from solver trace directories.",
    )
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument(
        "--in", dest="input_dir", required=True,
        help="directory holding <run>.csv/<run>.json traces",
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--linear-gaps", action="store_true",
        help="use linear instead of log axes for the gap panels",
    )
    args = parser.parse_args(argv)
    spec_kwargs = {}
    if args.linear_gaps:
        spec_kwargs = {"log_rel_gap": False, "log_fes_gap": False}
    try:
        path = render(
            FigureSpec(args.input_dir, args.kind, args.out, **spec_kwargs)
        )
    except FigureError as err:
        print(f"plot: {err}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
