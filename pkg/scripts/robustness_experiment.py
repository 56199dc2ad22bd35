#!/usr/bin/env python3
"""Corrupted-transcript robustness sweep, printed as a two-row table.

Compares rejection counts of a five-recognizer ensemble against a single
recognizer while transcript corruption grows.  Defaults are sized for a
quick desk run; the full setting is --chunks 151 --seeds 20.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from chunkalign.align import AlignParams
from chunkalign.pipeline import run_robustness
from chunkalign.search import WindowParams
from chunkalign.synth import make_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--chunks", type=int, default=60)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--n-backends", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--range-tops", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4, 0.5])
    parser.add_argument("--json-out", type=Path)
    args = parser.parse_args()

    corpus = make_corpus(args.chunks, seed=args.seed)
    report = run_robustness(
        corpus,
        [(0.0, top) for top in args.range_tops],
        n_backends=args.n_backends,
        seeds=list(range(args.seeds)),
        params=AlignParams(window=WindowParams(slack_back=20, slack_fwd=60)),
    )
    header = "".join(f"  [0,{top:.1f}]" for top in args.range_tops)
    print(f"median rejected chunks out of {report.total_chunks} over {args.seeds} seeds")
    print(f"{'':24}{header}")
    for label, counts in (
        (f"{args.n_backends} recognizers", report.moe_rejections),
        ("1 recognizer", report.single_rejections),
    ):
        cells = "".join(
            f"  {statistics.median(counts[(0.0, top)]):7.1f}" for top in args.range_tops
        )
        print(f"{label:>24}{cells}")
    if args.json_out:
        args.json_out.write_text(json.dumps(report.as_table(), indent=2) + "\n", encoding="utf-8")
        print(f"\nwrote {args.json_out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
