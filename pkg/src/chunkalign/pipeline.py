"""End-to-end corpus runs: orchestration, manifest, statistics, experiments.

``run_pipeline`` drives each (audio, text) pair through decode, downmix,
text cleaning, start/end trimming and forced alignment, then writes one
WAV per accepted chunk (long internal silences capped) plus a TSV
manifest with a JSON metadata sidecar.  Runs are deterministic for a
fixed config, seed and backend behavior; files may be processed in
parallel but results merge in input order.

``emit_stats`` summarizes a manifest (counts, duration/CER/word-count
histograms, search-type by quality distribution, per-backend
acceptance).  ``evaluate_backends`` scores recognizers against ground
truth both raw and with truncated outputs excluded.  ``run_robustness``
measures how rejection counts grow when transcripts are artificially
corrupted, comparing a multi-backend configuration against a single
backend over several error ranges and seeds.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .align import (
    AlignParams,
    ChunkRecord,
    NoViableAlignment,
    Rejection,
    forced_align,
    start_end_align,
)
from .audio import (
    DurationBounds,
    SilenceParams,
    decode_wav,
    encode_wav,
    strip_long_silences,
    to_mono,
)
from .search import ThresholdPolicy, WindowParams
from .synth import SyntheticCorpus
from .textprep import RuleSet, english_number_words, cer_normalize, prepare_reference
from .transcribe import (
    AudioChunk,
    Backend,
    BackendError,
    BackendSpec,
    ScriptedBackend,
    TranscribeStats,
    build_backend,
    derive_seed,
)
from .distance import EmptyReference, cer

log = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"
MANIFEST_COLUMNS = (
    "chunk_id",
    "source_file",
    "start_sample",
    "end_sample",
    "duration_s",
    "text",
    "cer",
    "quality",
    "search_type",
    "backend_id",
    "transcripts_tried",
    "flags",
)


@dataclass(frozen=True)
class FilePair:
    file_id: str
    audio_path: Path
    text_path: Path


@dataclass(frozen=True)
class PipelineConfig:
    pairs: tuple[FilePair, ...]
    backends: tuple[BackendSpec, ...]
    output_dir: Path
    policy: ThresholdPolicy = ThresholdPolicy()
    window: WindowParams = WindowParams()
    bounds: DurationBounds = DurationBounds()
    silence: SilenceParams = SilenceParams()
    max_gap: int = 60
    edge_candidates: int = 5
    max_silence_s: float = 1.0
    jobs: int = 1
    seed: int = 0
    rules: RuleSet = RuleSet()

    def __post_init__(self) -> None:
        ranks = [spec.reliability_rank for spec in self.backends]
        idents = [spec.id for spec in self.backends]
        if len(set(ranks)) != len(ranks) or len(set(idents)) != len(idents):
            raise ValueError("backend ids and reliability ranks must be unique")

    def align_params(self) -> AlignParams:
        return AlignParams(
            policy=self.policy,
            window=self.window,
            max_gap=self.max_gap,
            bounds=self.bounds,
            silence=self.silence,
            edge_candidates=self.edge_candidates,
        )

    def config_hash(self) -> str:
        blob = json.dumps(_jsonable(self), sort_keys=True, default=str)
        return hashlib.blake2b(blob.encode(), digest_size=8).hexdigest()


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return sorted(str(v) for v in obj)
    if isinstance(obj, (tuple, list)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


@dataclass
class FileOutcome:
    file_id: str
    records: list[ChunkRecord] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)
    durations: list[float] = field(default_factory=list)
    sample_rate: int = 0
    trim: tuple[int, int, int, int] | None = None
    error: str | None = None
    stats: TranscribeStats = field(default_factory=TranscribeStats)


@dataclass
class Manifest:
    outcomes: list[FileOutcome]
    metadata: dict

    @property
    def records(self) -> list[tuple[FileOutcome, ChunkRecord, float]]:
        rows = []
        for outcome in self.outcomes:
            for record, duration in zip(outcome.records, outcome.durations):
                rows.append((outcome, record, duration))
        return rows

    @property
    def total_rejected(self) -> int:
        return sum(len(o.rejections) for o in self.outcomes)


def _merge_stats(total: TranscribeStats, part: TranscribeStats) -> None:
    for mine, theirs in (
        (total.failures, part.failures),
        (total.degenerate, part.degenerate),
        (total.truncated, part.truncated),
    ):
        for key, count in theirs.items():
            mine[key] = mine.get(key, 0) + count


def _needs_work_wav(config: PipelineConfig) -> bool:
    return any(not spec.invocation.startswith("dir:") for spec in config.backends)


def _process_file(
    pair: FilePair, config: PipelineConfig, backend_factory=None
) -> FileOutcome:
    outcome = FileOutcome(file_id=pair.file_id)
    params = config.align_params()
    factory = backend_factory or (lambda specs, _pair: [build_backend(s) for s in specs])
    backends: list[Backend] = factory(config.backends, pair)
    work_dir = config.output_dir / "work"
    chunk_dir = config.output_dir / "chunks"
    try:
        buffer = to_mono(decode_wav(pair.audio_path.read_bytes()))
        outcome.sample_rate = buffer.sample_rate
        raw_text = pair.text_path.read_text(encoding="utf-8")
        text = prepare_reference(raw_text, config.rules, english_number_words)
        full_wav = None
        if _needs_work_wav(config):
            work_dir.mkdir(parents=True, exist_ok=True)
            full_wav = work_dir / f"{pair.file_id}.full.wav"
            full_wav.write_bytes(encode_wav(buffer))
        a0, a1, t0, t1 = start_end_align(
            buffer,
            text,
            backends,
            params,
            file_id=pair.file_id,
            wav_path=str(full_wav) if full_wav else None,
            stats=outcome.stats,
        )
        outcome.trim = (a0, a1, t0, t1)
        trimmed = buffer.slice(a0, a1)
        trimmed_text = text[t0:t1]
        trimmed_wav = None
        if _needs_work_wav(config):
            trimmed_wav = work_dir / f"{pair.file_id}.wav"
            trimmed_wav.write_bytes(encode_wav(trimmed))
        records, rejections = forced_align(
            trimmed,
            trimmed_text,
            backends,
            params,
            file_id=pair.file_id,
            wav_path=str(trimmed_wav) if trimmed_wav else None,
            stats=outcome.stats,
        )
        outcome.rejections = rejections
        chunk_dir.mkdir(parents=True, exist_ok=True)
        for record in records:
            piece = strip_long_silences(
                trimmed.slice(record.audio.start, record.audio.end),
                config.max_silence_s,
                config.silence,
            )
            (chunk_dir / f"{record.file_id}-{record.chunk_index:05d}.wav").write_bytes(
                encode_wav(piece)
            )
            # manifest rows carry source-file sample coordinates
            shifted = dataclasses.replace(
                record,
                audio=dataclasses.replace(
                    record.audio, start=record.audio.start + a0, end=record.audio.end + a0
                ),
            )
            outcome.records.append(shifted)
            outcome.durations.append(piece.duration_seconds)
    except (NoViableAlignment, EmptyReference) as exc:
        outcome.error = f"{type(exc).__name__}: {exc}"
    except (OSError, ValueError) as exc:
        outcome.error = f"{type(exc).__name__}: {exc}"
    finally:
        for backend in backends:
            backend.close()
    return outcome


def run_pipeline(config: PipelineConfig, backend_factory=None) -> Manifest:
    """Process every configured pair and write the manifest.

    Per-file failures are recorded in the manifest metadata and skipped;
    only configuration or output-root errors raise.
    """
    config.output_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    if config.jobs > 1 and len(config.pairs) > 1 and backend_factory is None:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_process_file, config.pairs, [config] * len(config.pairs)))
    else:
        outcomes = [_process_file(pair, config, backend_factory) for pair in config.pairs]
    stats = TranscribeStats()
    for outcome in outcomes:
        _merge_stats(stats, outcome.stats)
    metadata = {
        "tool_version": TOOL_VERSION,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "timestamps": {"started": started, "finished": time.time()},
        "files": {
            o.file_id: {
                "error": o.error,
                "trim": list(o.trim) if o.trim else None,
                "sample_rate": o.sample_rate,
                "accepted": len(o.records),
                "rejected": len(o.rejections),
                "rejections": [
                    {
                        "chunk_index": r.chunk_index,
                        "reason": r.reason,
                        "best_cer": r.best_attempt.cer_value if r.best_attempt else None,
                    }
                    for r in o.rejections
                ],
            }
            for o in outcomes
        },
        "transcribe_stats": {
            "failures": stats.failures,
            "degenerate": stats.degenerate,
            "truncated": stats.truncated,
        },
    }
    manifest = Manifest(outcomes, metadata)
    write_manifest(manifest, config.output_dir)
    return manifest


def manifest_rows(manifest: Manifest) -> list[dict]:
    rows = []
    for outcome, record, duration in manifest.records:
        rows.append(
            {
                "chunk_id": f"{record.file_id}-{record.chunk_index:05d}",
                "source_file": record.file_id,
                "start_sample": str(record.audio.start),
                "end_sample": str(record.audio.end),
                "duration_s": f"{duration:.6f}",
                "text": record.matched_text.replace("\t", " ").replace("\n", " "),
                "cer": f"{record.cer:.8f}",
                "quality": record.quality.value,
                "search_type": record.search_type.value,
                "backend_id": record.backend_id,
                "transcripts_tried": str(record.transcripts_tried),
                "flags": ",".join(sorted(record.flags)),
            }
        )
    return rows


def write_manifest(manifest: Manifest, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.tsv"
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=MANIFEST_COLUMNS, delimiter="\t", lineterminator="\n")
    writer.writeheader()
    for row in manifest_rows(manifest):
        writer.writerow(row)
    path.write_text(buffer.getvalue(), encoding="utf-8")
    meta_path = out_dir / "manifest.meta.json"
    meta_path.write_text(
        json.dumps(manifest.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def read_manifest_rows(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle, delimiter="\t"))


@dataclass
class StatsReport:
    accepted: int
    rejected: int
    file_failures: int
    total_duration_s: float
    duration_hist: dict
    cer_hist: dict
    quality_by_search: dict[str, int]
    word_count_hist: dict[int, int]
    unique_words: int
    per_backend_accepts: dict[str, int]
    truncation_filtered: dict[str, int]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _histogram(values: list[float], edges: np.ndarray) -> dict:
    counts, _ = np.histogram(np.asarray(values, dtype=float), bins=edges)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def emit_stats(
    manifest: Manifest | None = None,
    *,
    rows: list[dict] | None = None,
    metadata: dict | None = None,
    out_dir: Path | None = None,
    policy: ThresholdPolicy = ThresholdPolicy(),
    duration_bin_s: float = 0.5,
    cer_bin: float = 0.01,
) -> StatsReport:
    """Aggregate manifest rows into the corpus statistics report.

    Accepts either an in-memory manifest or rows read back from a TSV.
    With ``out_dir`` set, writes ``stats.json`` plus plot-ready CSVs; the
    CER histogram carries the HIGH/MIDDLE threshold markers.
    """
    if rows is None:
        if manifest is None:
            raise ValueError("need a manifest or rows")
        rows = manifest_rows(manifest)
        metadata = manifest.metadata
    metadata = metadata or {}
    durations = [float(r["duration_s"]) for r in rows]
    cers = [float(r["cer"]) for r in rows]
    texts = [r["text"] for r in rows]
    rejected = sum(
        info.get("rejected", 0) for info in metadata.get("files", {}).values()
    )
    failures = sum(
        1 for info in metadata.get("files", {}).values() if info.get("error")
    )
    quality_by_search: dict[str, int] = {}
    for row in rows:
        key = f"{row['search_type']}/{row['quality']}"
        quality_by_search[key] = quality_by_search.get(key, 0) + 1
    per_backend: dict[str, int] = {}
    for row in rows:
        per_backend[row["backend_id"]] = per_backend.get(row["backend_id"], 0) + 1
    word_counts: dict[int, int] = {}
    vocabulary: set[str] = set()
    for text in texts:
        words = cer_normalize(text).split()
        word_counts[len(words)] = word_counts.get(len(words), 0) + 1
        vocabulary.update(words)
    max_duration = max(durations, default=0.0)
    duration_edges = np.arange(0.0, max(max_duration + duration_bin_s, duration_bin_s * 2), duration_bin_s)
    max_cer = max(cers, default=0.0)
    cer_edges = np.arange(0.0, max(max_cer + cer_bin, policy.middle + 2 * cer_bin), cer_bin)
    report = StatsReport(
        accepted=len(rows),
        rejected=rejected,
        file_failures=failures,
        total_duration_s=float(sum(durations)),
        duration_hist=_histogram(durations, duration_edges),
        cer_hist={
            **_histogram(cers, cer_edges),
            "threshold_marks": [policy.high, policy.middle],
        },
        quality_by_search=dict(sorted(quality_by_search.items())),
        word_count_hist=dict(sorted(word_counts.items())),
        unique_words=len(vocabulary),
        per_backend_accepts=dict(sorted(per_backend.items())),
        truncation_filtered=dict(metadata.get("transcribe_stats", {}).get("truncated", {})),
    )
    if out_dir is not None:
        _write_stats_files(report, out_dir)
    return report


def _write_stats_files(report: StatsReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "stats.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    def write_csv(name: str, header: list[str], rows: list[list]) -> None:
        with open(out_dir / name, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)

    write_csv(
        "duration_hist.csv",
        ["bin_start_s", "bin_end_s", "count"],
        [
            [report.duration_hist["edges"][i], report.duration_hist["edges"][i + 1], c]
            for i, c in enumerate(report.duration_hist["counts"])
        ],
    )
    write_csv(
        "cer_hist.csv",
        ["bin_start", "bin_end", "count"],
        [
            [report.cer_hist["edges"][i], report.cer_hist["edges"][i + 1], c]
            for i, c in enumerate(report.cer_hist["counts"])
        ],
    )
    write_csv(
        "quality_by_search.csv",
        ["search_type", "quality", "count"],
        [key.split("/") + [count] for key, count in report.quality_by_search.items()],
    )
    write_csv(
        "word_count_hist.csv",
        ["words", "count"],
        [[words, count] for words, count in report.word_count_hist.items()],
    )


@dataclass(frozen=True)
class BackendEvaluation:
    backend_id: str
    mean_cer_all: float | None
    mean_cer_filtered: float | None
    transcribed: int
    skipped: int
    truncated: int


def evaluate_backends(
    corpus: list[tuple[AudioChunk, str]],
    backends: list[Backend],
    *,
    length_ratio: Fraction = Fraction(4, 5),
) -> list[BackendEvaluation]:
    """Mean CER per backend, over all transcripts and non-truncated ones.

    The truncation filter compares transcript length against the ground
    truth text (not against other transcripts), both in normalized
    characters, with an exact rational threshold.
    """
    if not corpus:
        raise ValueError("need a non-empty evaluation corpus")
    out = []
    for backend in backends:
        all_scores: list[float] = []
        kept_scores: list[float] = []
        skipped = 0
        truncated = 0
        for chunk, reference in corpus:
            try:
                text = backend.transcribe(chunk)
            except BackendError as exc:
                log.warning("evaluation: %s failed on %s: %s", backend.spec.id, chunk.chunk_id, exc)
                skipped += 1
                continue
            score = cer(reference, text)
            all_scores.append(score)
            ref_len = len(cer_normalize(reference))
            hyp_len = len(cer_normalize(text))
            if hyp_len * length_ratio.denominator >= length_ratio.numerator * ref_len:
                kept_scores.append(score)
            else:
                truncated += 1
        out.append(
            BackendEvaluation(
                backend_id=backend.spec.id,
                mean_cer_all=statistics.fmean(all_scores) if all_scores else None,
                mean_cer_filtered=statistics.fmean(kept_scores) if kept_scores else None,
                transcribed=len(all_scores),
                skipped=skipped,
                truncated=truncated,
            )
        )
    return out


@dataclass
class RobustnessReport:
    ranges: list[tuple[float, float]]
    seeds: list[int]
    total_chunks: int
    moe_rejections: dict[tuple[float, float], list[int]]
    single_rejections: dict[tuple[float, float], list[int]]

    def medians(self) -> dict[str, list[float]]:
        return {
            "moe": [statistics.median(self.moe_rejections[r]) for r in self.ranges],
            "single": [statistics.median(self.single_rejections[r]) for r in self.ranges],
        }

    def as_table(self) -> dict:
        medians = self.medians()
        return {
            "ranges": [list(r) for r in self.ranges],
            "total_chunks": self.total_chunks,
            "rows": {
                "multiple_backends_median_rejections": medians["moe"],
                "single_backend_median_rejections": medians["single"],
            },
            "per_seed": {
                "moe": {str(list(r)): v for r, v in self.moe_rejections.items()},
                "single": {str(list(r)): v for r, v in self.single_rejections.items()},
            },
        }


def _corrupted_backends(
    corpus: SyntheticCorpus,
    error_range: tuple[float, float],
    n_backends: int,
    seed: int,
) -> list[Backend]:
    return [
        ScriptedBackend(
            BackendSpec(f"asr{rank}", rank, "dir:unused"),
            corpus.script,
            error_range=error_range,
            seed=derive_seed("robustness", seed, rank),
        )
        for rank in range(1, n_backends + 1)
    ]


def run_robustness(
    corpus: SyntheticCorpus,
    error_ranges: list[tuple[float, float]],
    n_backends: int = 5,
    seeds: list[int] | None = None,
    params: AlignParams | None = None,
) -> RobustnessReport:
    """Rejection counts under corrupted transcripts, ensemble vs single.

    The corpus must align with zero rejections under faithful mocks;
    that precondition is verified before the sweep.
    """
    seeds = seeds if seeds is not None else list(range(20))
    params = params or AlignParams()
    perfect = _corrupted_backends(corpus, (0.0, 0.0), 1, seed=0)
    records, rejections = forced_align(corpus.audio, corpus.text, perfect, params)
    if rejections:
        raise ValueError(f"base corpus does not align cleanly: {len(rejections)} rejections")
    total = len(records)
    moe: dict[tuple[float, float], list[int]] = {tuple(r): [] for r in error_ranges}
    single: dict[tuple[float, float], list[int]] = {tuple(r): [] for r in error_ranges}
    for error_range in error_ranges:
        key = tuple(error_range)
        for seed in seeds:
            ensemble = _corrupted_backends(corpus, key, n_backends, seed)
            _, rej = forced_align(corpus.audio, corpus.text, ensemble, params)
            moe[key].append(len(rej))
            lone = _corrupted_backends(corpus, key, 1, derive_seed("single", seed))
            _, rej = forced_align(corpus.audio, corpus.text, lone, params)
            single[key].append(len(rej))
        log.info(
            "robustness range %s: moe median %.1f, single median %.1f",
            key,
            statistics.median(moe[key]),
            statistics.median(single[key]),
        )
    return RobustnessReport(
        ranges=[tuple(r) for r in error_ranges],
        seeds=list(seeds),
        total_chunks=total,
        moe_rejections=moe,
        single_rejections=single,
    )
