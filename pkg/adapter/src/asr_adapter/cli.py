"""Entry point: load the recognizer, then serve until stdin closes."""

from __future__ import annotations

import argparse
import sys

from .server import AdapterConfig, serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="asr-adapter",
        description="Serve a speech recognizer over line-delimited JSON on stdin/stdout.",
    )
    parser.add_argument(
        "--model",
        default="echo",
        help="'echo' (sidecar .txt next to the WAV) or a Hugging Face ASR model id",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--timeout", type=float, default=120.0, dest="timeout_s")
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig(model=args.model, device=args.device, timeout_s=args.timeout_s)
        serve(config)
    except Exception as exc:
        print(f"asr-adapter: failed to start {args.model!r}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
