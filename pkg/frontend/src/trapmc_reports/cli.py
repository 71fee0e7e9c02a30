"""Command-line wrapper around render_report.

Exit codes: 0 success, 1 input/validation error.
"""

from __future__ import annotations

import argparse
import sys

from .readers import ReportError
from .render import ALL_FIGURES, ReportSpec, render_report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="trapmc-report",
        description="Render static figures + index.html from trapmc outputs.",
    )
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--sweep-csv", help="summary.csv from `trapmc sweep`")
    ap.add_argument("--fit-json", help="output of `trapmc fit --out ...`")
    ap.add_argument("--bounds-json", help="output of `trapmc bounds --out ...`")
    ap.add_argument("--alpha-json", help="output of `trapmc alpha-curve`")
    ap.add_argument("--band-json", help="output of `trapmc band-resample`")
    ap.add_argument("--figures", default="",
                    help=f"comma-separated subset of {','.join(ALL_FIGURES)}; "
                         "default: everything the given inputs allow")
    ap.add_argument("--format", dest="image_format", default="png",
                    choices=("png", "svg"))
    ap.add_argument("--alpha", type=float, help="expected overlay alpha")
    ap.add_argument("--gamma", type=float, help="expected overlay gamma")
    ap.add_argument("--d", type=int, help="expected overlay dimension")
    ap.add_argument("--xi", type=float, help="expected overlay xi")
    return ap


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    figures = tuple(f for f in args.figures.split(",") if f.strip())
    try:
        spec = ReportSpec(
            out_dir=args.out_dir,
            sweep_csv=args.sweep_csv,
            fit_json=args.fit_json,
            bounds_json=args.bounds_json,
            alpha_json=args.alpha_json,
            band_json=args.band_json,
            figures=figures,
            image_format=args.image_format,
            alpha=args.alpha, gamma=args.gamma, d=args.d, xi=args.xi,
        )
        written = render_report(spec)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    for path in sorted(written):
        print(path)
    sys.exit(0)


if __name__ == "__main__":
    main()
