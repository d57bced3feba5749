"""memegrid-figures render --run-dir DIR [--out DIR]"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .io import FigureSpec
from .render import render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="memegrid-figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render figure analogs from run outputs")
    p.add_argument("--run-dir", required=True,
                   help="directory holding stats.csv / registry.jsonl / sweep.csv")
    p.add_argument("--out", help="output directory (default: run dir)")
    p.add_argument("--window", type=int, default=1000)
    p.add_argument("--raster-threshold", type=int, default=80)
    p.add_argument("--meme-threshold", type=int, default=8)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    run_dir = Path(args.run_dir)
    spec = FigureSpec(
        run_dir=run_dir,
        out_dir=Path(args.out) if args.out else run_dir,
        window=args.window,
        raster_threshold=args.raster_threshold,
        meme_threshold=args.meme_threshold,
    )
    try:
        results = render_all(spec)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, info in results.items():
        print(f"{name}: {info['path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
