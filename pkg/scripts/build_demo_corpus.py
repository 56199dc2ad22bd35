#!/usr/bin/env python3
"""Generate a synthetic narrated corpus ready for the align pipeline.

Writes <name>.wav / <name>.txt pairs plus a transcripts/ directory that
serves a precomputed recognizer backend, so the full pipeline runs
without any model:

    python scripts/build_demo_corpus.py --out demo --files 2
    chunkalign align --input-dir demo --output-dir demo-out \
        --backend truth=dir:demo/transcripts
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from chunkalign.align import AlignParams, start_end_align
from chunkalign.audio import encode_wav, segment_by_silence
from chunkalign.synth import make_corpus
from chunkalign.transcribe import BackendSpec, ScriptedBackend


def spoken_text(script, lo, hi):
    return " ".join(
        text for start, end, text in script if min(hi, end) - max(lo, start) >= (end - start) / 2
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("demo"))
    parser.add_argument("--files", type=int, default=2)
    parser.add_argument("--sentences", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--with-mismatches",
        action="store_true",
        help="add a spoken-only title, a censored phrase and a repeated sentence",
    )
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    transcripts = args.out / "transcripts"
    transcripts.mkdir(exist_ok=True)
    for index in range(args.files):
        name = f"reading{index:02d}"
        corpus = make_corpus(
            args.sentences,
            seed=args.seed + index,
            spoken_only_title=args.with_mismatches,
            censor_phrase=args.with_mismatches,
            repeat_sentence=args.with_mismatches,
        )
        (args.out / f"{name}.wav").write_bytes(encode_wav(corpus.audio))
        (args.out / f"{name}.txt").write_text(corpus.text, encoding="utf-8")
        for seg in segment_by_silence(corpus.audio):
            for tag in ("start", "end"):
                (transcripts / f"{name}-edge-{tag}-{seg.start}.txt").write_text(
                    spoken_text(corpus.script, seg.start, seg.end), encoding="utf-8"
                )
        # chunk ids must match what the pipeline will assign, which
        # segments the audio only after trimming both ends
        truth = [
            ScriptedBackend(
                BackendSpec("truth", 1, "dir:unused"), corpus.script, source=corpus.audio
            )
        ]
        a0, a1, _, _ = start_end_align(corpus.audio, corpus.text, truth, AlignParams())
        segments = segment_by_silence(corpus.audio.slice(a0, a1))
        for idx, seg in enumerate(segments):
            (transcripts / f"{name}-{idx:05d}.txt").write_text(
                spoken_text(corpus.script, a0 + seg.start, a0 + seg.end),
                encoding="utf-8",
            )
        print(
            f"wrote {name}: {corpus.audio.duration_seconds:.0f}s audio, "
            f"{len(segments)} chunks"
        )
    print(
        f"\nnext: chunkalign align --input-dir {args.out} "
        f"--output-dir {args.out}-aligned --backend truth=dir:{transcripts}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
