"""Command-line entry points.

Subcommands: ``align`` (full pipeline over an input directory or config
file), ``stats`` (manifest to report), ``eval-backends`` (Table-style
backend scoring on a transcribed chunk corpus), ``robustness`` (the
corrupted-transcript experiment on a synthetic corpus) and ``tokenize``
(sentence splitting).  Configuration comes from one JSON file plus flag
overrides.  Exit codes: 0 success, 1 partial (some files failed),
2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .align import AlignParams
from .audio import DurationBounds, SilenceParams, decode_wav, to_mono
from .pipeline import (
    FilePair,
    PipelineConfig,
    emit_stats,
    evaluate_backends,
    read_manifest_rows,
    run_pipeline,
    run_robustness,
)
from .search import ThresholdPolicy, WindowParams
from .synth import make_corpus
from .textprep import RuleSet
from .tokenizer import DictionaryTagger, SubprocessTagger, split_sentences
from .transcribe import AudioChunk, BackendSpec, build_backend
from .audio import Segment

log = logging.getLogger("chunkalign")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


class ConfigurationError(Exception):
    pass


def _add_common_align_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--input-dir", type=Path, help="directory of <name>.wav/<name>.txt pairs")
    parser.add_argument("--output-dir", type=Path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--high-cer", type=float)
    parser.add_argument("--mid-cer", type=float)
    parser.add_argument("--min-chunk-s", type=float)
    parser.add_argument("--max-chunk-s", type=float)
    parser.add_argument("--max-gap", type=int)
    parser.add_argument(
        "--backend",
        action="append",
        default=[],
        metavar="ID=CMD",
        help="recognizer backend: a command line or dir:<path>; rank = order given",
    )


def _backend_specs(entries: list[str]) -> tuple[BackendSpec, ...]:
    specs = []
    for rank, entry in enumerate(entries, 1):
        ident, sep, invocation = entry.partition("=")
        if not sep or not ident or not invocation:
            raise ConfigurationError(f"bad --backend value: {entry!r}")
        specs.append(BackendSpec(ident, rank, invocation))
    return tuple(specs)


def _pairs_from_dir(directory: Path) -> tuple[FilePair, ...]:
    if not directory.is_dir():
        raise ConfigurationError(f"input directory not found: {directory}")
    pairs = []
    for wav in sorted(directory.glob("*.wav")):
        text = wav.with_suffix(".txt")
        if text.is_file():
            pairs.append(FilePair(wav.stem, wav, text))
        else:
            log.warning("no transcript for %s, skipping", wav.name)
    if not pairs:
        raise ConfigurationError(f"no audio/text pairs in {directory}")
    return tuple(pairs)


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
    pairs: tuple[FilePair, ...] = ()
    if "input_pairs" in raw:
        pairs = tuple(
            FilePair(Path(audio).stem, Path(audio), Path(text))
            for audio, text in raw["input_pairs"]
        )
    if args.input_dir or ("input_dir" in raw and not pairs):
        pairs = _pairs_from_dir(args.input_dir or Path(raw["input_dir"]))
    if not pairs:
        raise ConfigurationError("no inputs: pass --input-dir or config input_pairs")
    backends = _backend_specs(args.backend)
    if not backends and "backends" in raw:
        backends = tuple(
            BackendSpec(b["id"], b.get("rank", i + 1), b["invocation"])
            for i, b in enumerate(raw["backends"])
        )
    if not backends:
        raise ConfigurationError("no backends configured")
    output_dir = args.output_dir or Path(raw.get("output_dir", "chunkalign-out"))
    thresholds = raw.get("thresholds", {})
    policy = ThresholdPolicy(
        high=args.high_cer if args.high_cer is not None else thresholds.get("high", 0.05),
        middle=args.mid_cer if args.mid_cer is not None else thresholds.get("middle", 0.2),
    )
    bounds_raw = raw.get("bounds", {})
    bounds = DurationBounds(
        min_s=args.min_chunk_s if args.min_chunk_s is not None else bounds_raw.get("min_s", 2.0),
        max_s=args.max_chunk_s if args.max_chunk_s is not None else bounds_raw.get("max_s", 12.0),
    )
    silence = SilenceParams(**raw.get("silence", {}))
    window = WindowParams(**raw.get("window", {}))
    rules = RuleSet.from_file(raw["rules_file"]) if raw.get("rules_file") else RuleSet()
    return PipelineConfig(
        pairs=pairs,
        backends=backends,
        output_dir=output_dir,
        policy=policy,
        window=window,
        bounds=bounds,
        silence=silence,
        max_gap=args.max_gap if args.max_gap is not None else raw.get("max_gap", 60),
        jobs=args.jobs if args.jobs is not None else raw.get("jobs", os.cpu_count() or 1),
        seed=args.seed if args.seed is not None else raw.get("seed", 0),
        rules=rules,
    )


def _cmd_align(args: argparse.Namespace) -> int:
    config = _load_config(args)
    manifest = run_pipeline(config)
    accepted = len(manifest.records)
    failures = [o.file_id for o in manifest.outcomes if o.error]
    print(
        f"{accepted} chunks accepted, {manifest.total_rejected} rejected, "
        f"{len(failures)} file failures -> {config.output_dir / 'manifest.tsv'}"
    )
    for file_id in failures:
        print(f"  failed: {file_id}: {manifest.metadata['files'][file_id]['error']}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    rows = read_manifest_rows(args.manifest)
    meta_path = args.manifest.with_name("manifest.meta.json")
    metadata = {}
    if meta_path.is_file():
        metadata = json.loads(meta_path.read_text(encoding="utf-8"))
    report = emit_stats(rows=rows, metadata=metadata, out_dir=args.output_dir)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_eval_backends(args: argparse.Namespace) -> int:
    specs = _backend_specs(args.backend)
    if not specs:
        raise ConfigurationError("eval-backends needs at least one --backend")
    corpus = []
    for wav in sorted(args.input_dir.glob("*.wav")):
        text = wav.with_suffix(".txt")
        if not text.is_file():
            continue
        buffer = to_mono(decode_wav(wav.read_bytes()))
        chunk = AudioChunk(
            buffer,
            Segment(0, buffer.frame_count, buffer.sample_rate),
            wav.stem,
            wav_path=str(wav),
        )
        corpus.append((chunk, text.read_text(encoding="utf-8")))
    if not corpus:
        raise ConfigurationError(f"no chunk/transcript pairs under {args.input_dir}")
    backends = [build_backend(s) for s in specs]
    try:
        table = evaluate_backends(corpus, backends)
    finally:
        for backend in backends:
            backend.close()
    width = max(len(row.backend_id) for row in table)
    print(f"{'backend':<{width}}  {'mean CER (all)':>14}  {'mean CER (filtered)':>19}  skipped")
    for row in table:
        all_s = f"{row.mean_cer_all:.4f}" if row.mean_cer_all is not None else "-"
        kept_s = f"{row.mean_cer_filtered:.4f}" if row.mean_cer_filtered is not None else "-"
        print(f"{row.backend_id:<{width}}  {all_s:>14}  {kept_s:>19}  {row.skipped}")
    if args.output_dir:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        payload = [dataclasses.asdict(row) for row in table]
        (args.output_dir / "backend_eval.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def _cmd_robustness(args: argparse.Namespace) -> int:
    corpus = make_corpus(args.chunks, seed=args.seed)
    ranges = [(0.0, hi) for hi in args.range_tops]
    params = AlignParams(window=WindowParams(slack_back=20, slack_fwd=60))
    report = run_robustness(
        corpus,
        ranges,
        n_backends=args.n_backends,
        seeds=list(range(args.seeds)),
        params=params,
    )
    table = report.as_table()
    medians = report.medians()
    header = "  ".join(f"[0,{hi:.1f}]" for hi in args.range_tops)
    print(f"rejected chunks out of {report.total_chunks} (median over {args.seeds} seeds)")
    print(f"{'':>22}  {header}")
    print(f"{'multiple backends':>22}  " + "  ".join(f"{v:7.1f}" for v in medians["moe"]))
    print(f"{'single backend':>22}  " + "  ".join(f"{v:7.1f}" for v in medians["single"]))
    if args.output_dir:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        (args.output_dir / "robustness.json").write_text(
            json.dumps(table, indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def _cmd_tokenize(args: argparse.Namespace) -> int:
    text = args.input.read_text(encoding="utf-8") if args.input else sys.stdin.read()
    if args.tagger_cmd:
        tagger = SubprocessTagger(args.tagger_cmd)
    elif args.tags:
        tagger = DictionaryTagger.from_file(args.tags)
    else:
        tagger = DictionaryTagger({})
    sentences = split_sentences(text, tagger, args.min_len, args.max_len)
    for sentence in sentences:
        print(sentence)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chunkalign",
        description="Align long narrated audio with imperfect transcripts into validated chunks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_align = sub.add_parser("align", help="run the full pipeline")
    _add_common_align_flags(p_align)
    p_align.set_defaults(func=_cmd_align)

    p_stats = sub.add_parser("stats", help="summarize a manifest")
    p_stats.add_argument("manifest", type=Path)
    p_stats.add_argument("--output-dir", type=Path)
    p_stats.set_defaults(func=_cmd_stats)

    p_eval = sub.add_parser("eval-backends", help="score backends against ground truth chunks")
    p_eval.add_argument("--input-dir", type=Path, required=True)
    p_eval.add_argument("--backend", action="append", default=[], metavar="ID=CMD")
    p_eval.add_argument("--output-dir", type=Path)
    p_eval.set_defaults(func=_cmd_eval_backends)

    p_rob = sub.add_parser("robustness", help="corrupted-transcript rejection experiment")
    p_rob.add_argument("--chunks", type=int, default=151)
    p_rob.add_argument("--seeds", type=int, default=20)
    p_rob.add_argument("--n-backends", type=int, default=5)
    p_rob.add_argument("--seed", type=int, default=0)
    p_rob.add_argument(
        "--range-tops",
        type=float,
        nargs="+",
        default=[0.1, 0.2, 0.3, 0.4, 0.5],
        help="upper ends of the [0, x] corruption ranges",
    )
    p_rob.add_argument("--output-dir", type=Path)
    p_rob.set_defaults(func=_cmd_robustness)

    p_tok = sub.add_parser("tokenize", help="split text into bounded sentences")
    p_tok.add_argument("--input", type=Path, help="text file (default: stdin)")
    p_tok.add_argument("--min-len", type=int, default=3)
    p_tok.add_argument("--max-len", type=int, default=30)
    p_tok.add_argument("--tags", type=Path, help="JSON token->tag dictionary")
    p_tok.add_argument("--tagger-cmd", help="subprocess tagger command")
    p_tok.set_defaults(func=_cmd_tokenize)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
