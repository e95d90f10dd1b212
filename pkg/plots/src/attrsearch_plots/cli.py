"""Command line: render a result bundle into figure files.

Usage: plots render <bundle_dir> <out_dir> --format png|svg
Exit codes: 0 success (including an empty manifest, with a warning),
2 malformed bundle or arguments.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .bundle import BundleError, load_bundle
from .render import FORMATS, render_bundle


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render attrsearch result bundles into figures."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render every figure in a bundle")
    p_render.add_argument("bundle_dir")
    p_render.add_argument("out_dir")
    p_render.add_argument("--format", choices=FORMATS, default="png")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        bundle = load_bundle(args.bundle_dir)
        if not bundle.figures:
            print("plots: warning: empty manifest, nothing to render", file=sys.stderr)
            return 0
        written = render_bundle(bundle, args.out_dir, fmt=args.format)
    except BundleError as e:
        print(f"plots: error: {e}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
