"""Forced alignment of narrated audio against imperfect reference text.

The aligner walks silence-bounded audio chunks in order, keeping a text
cursor at the estimated consumed prefix.  Each chunk's ranked hypothesis
transcripts are matched inside a cursor-anchored window: a contiguous
interval search first (accepted immediately at HIGH quality, or at
MIDDLE once the scan is complete), then a gapped search that may bridge
one censored or skipped passage.  A chunk whose every hypothesis stays
above the reject threshold becomes a Rejection carrying the best attempt
seen, and the cursor advances by the estimated consumed length instead
of a matched span.

Accepted spans are forced to be disjoint and increasing: the window
never reaches behind the last accepted span's end, so a repeated
sentence in the audio can never consume the same text twice.

Whole files are first trimmed by ``start_end_align``, which tries the
first and last few silence-bounded segments as candidate boundaries and
keeps the pair whose transcripts match the text extremities with the
lowest CER; this absorbs spoken titles and unread trailing material.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .audio import AudioBuffer, DurationBounds, Segment, SilenceParams, segment_by_silence
from .search import (
    EmptyWindow,
    MatchQuality,
    MatchResult,
    SearchType,
    ThresholdPolicy,
    WindowParams,
    gapped_search,
    interval_search,
)
from .transcribe import (
    MAX_CHUNK_SECONDS,
    AllBackendsFailed,
    AudioChunk,
    Backend,
    TranscribeStats,
    Transcript,
    transcribe_chunk,
)

log = logging.getLogger(__name__)


class NoViableAlignment(Exception):
    """No candidate boundary pair matched the text within the thresholds."""


@dataclass
class Cursor:
    """Consumed-prefix marker into the reference text.

    ``position`` is the estimated progress and anchors search windows;
    ``floor`` is the end of the last accepted span, a hard lower bound
    that keeps accepted spans disjoint.
    """

    position: int = 0
    floor: int = 0

    def advance_to(self, end: int) -> None:
        self.position = max(self.position, end)
        self.floor = max(self.floor, end)

    def advance_estimate(self, amount: int, text_len: int) -> None:
        self.position = min(text_len, self.position + max(0, amount))


@dataclass(frozen=True)
class AlignParams:
    policy: ThresholdPolicy = ThresholdPolicy()
    window: WindowParams = WindowParams()
    max_gap: int = 60
    bounds: DurationBounds = DurationBounds()
    silence: SilenceParams = SilenceParams()
    edge_candidates: int = 5


@dataclass(frozen=True)
class HypothesisMatch:
    result: MatchResult
    backend_id: str
    transcripts_tried: int


@dataclass(frozen=True)
class Rejection:
    """A chunk no hypothesis could place; kept for diagnostics."""

    reason: str
    best_attempt: MatchResult | None = None
    backend_id: str | None = None
    transcripts_tried: int = 0
    segment: Segment | None = None
    chunk_index: int | None = None


@dataclass(frozen=True)
class ChunkRecord:
    """One accepted (audio segment, matched text) pair."""

    file_id: str
    chunk_index: int
    audio: Segment
    matched_text: str
    cer: float
    quality: MatchQuality
    search_type: SearchType
    backend_id: str
    transcripts_tried: int
    flags: frozenset[str] = frozenset()
    text_span: tuple[int, int] = (0, 0)
    gap_span: tuple[int, int] | None = None


def match_hypotheses(
    text: str,
    cursor: Cursor,
    transcripts: list[Transcript],
    params: AlignParams,
) -> HypothesisMatch | Rejection:
    """Try ranked transcripts until one places within the thresholds.

    Per transcript: interval search (immediate HIGH exit, MIDDLE accepted
    once the scan completes), then gapped search the same way.  Searches
    run capped at the reject threshold, so accept/reject decisions are
    exact while rejected-attempt diagnostics stay best-effort.
    """
    best: MatchResult | None = None
    best_backend: str | None = None
    for tried, transcript in enumerate(transcripts, 1):
        window = params.window.around(
            cursor.position, len(transcript.normalized), len(text), floor=cursor.floor
        )
        for search in (_interval_pass, _gapped_pass):
            result = search(text, transcript, window, params)
            if result is None:
                continue
            if result.quality is not MatchQuality.REJECT:
                return HypothesisMatch(result, transcript.backend_id, tried)
            if best is None or result.cer_value < best.cer_value:
                best = result
                best_backend = transcript.backend_id
    return Rejection(
        "no span within thresholds",
        best_attempt=best,
        backend_id=best_backend,
        transcripts_tried=len(transcripts),
    )


def _interval_pass(
    text: str, transcript: Transcript, window: tuple[int, int], params: AlignParams
) -> MatchResult | None:
    try:
        return interval_search(
            text,
            transcript.text,
            window,
            policy=params.policy,
            max_cer=params.policy.middle,
            early_exit=True,
        )
    except EmptyWindow:
        return None


def _gapped_pass(
    text: str, transcript: Transcript, window: tuple[int, int], params: AlignParams
) -> MatchResult | None:
    try:
        return gapped_search(
            text,
            transcript.text,
            window,
            params.max_gap,
            policy=params.policy,
            max_cer=params.policy.middle,
            early_exit=True,
        )
    except EmptyWindow:
        return None


def _edge_candidate_cer(
    text: str,
    transcript: Transcript,
    window: tuple[int, int],
    params: AlignParams,
) -> MatchResult | None:
    try:
        return interval_search(
            text,
            transcript.text,
            window,
            policy=params.policy,
            max_cer=params.policy.middle,
        )
    except EmptyWindow:
        return None


def start_end_align(
    audio: AudioBuffer,
    text: str,
    backends: list[Backend],
    params: AlignParams | None = None,
    *,
    file_id: str = "file",
    wav_path: str | None = None,
    stats: TranscribeStats | None = None,
) -> tuple[int, int, int, int]:
    """Trim offsets aligning the file's boundaries with the text's.

    Evaluates the first and last ``edge_candidates`` silence-bounded
    segments as potential true starts/ends; each candidate segment is
    transcribed and matched near the corresponding text extremity, and
    the lowest-CER pair wins.  Raises ``NoViableAlignment`` when every
    candidate stays above the reject threshold.
    """
    params = params or AlignParams()
    segments = segment_by_silence(audio, params.bounds, params.silence)
    if not segments:
        raise NoViableAlignment("no speech segments detected")
    head = segments[: params.edge_candidates]
    tail = segments[-params.edge_candidates :]

    def top_transcript(segment: Segment, tag: str) -> Transcript | None:
        chunk = AudioChunk(
            audio, segment, f"{file_id}-edge-{tag}-{segment.start}", wav_path
        )
        if segment.duration_s > MAX_CHUNK_SECONDS:
            return None
        try:
            return transcribe_chunk(chunk, backends, stats=stats)[0]
        except AllBackendsFailed:
            return None

    best_start: tuple[float, int, int] | None = None  # (cer, audio_start, text_start)
    consumed = 0
    for segment in head:
        transcript = top_transcript(segment, "start")
        if transcript is None:
            continue
        consumed += len(transcript.normalized)
        hi = min(len(text), int(params.window.scale * consumed) + params.window.slack_fwd)
        result = _edge_candidate_cer(text, transcript, (0, hi), params)
        if result is None:
            continue
        candidate = (result.cer_value, segment.start, result.text_start)
        if best_start is None or candidate[0] < best_start[0]:
            best_start = candidate
    best_end: tuple[float, int, int] | None = None  # (cer, audio_end, text_end)
    consumed = 0
    for segment in reversed(tail):
        transcript = top_transcript(segment, "end")
        if transcript is None:
            continue
        consumed += len(transcript.normalized)
        lo = max(0, len(text) - int(params.window.scale * consumed) - params.window.slack_fwd)
        result = _edge_candidate_cer(text, transcript, (lo, len(text)), params)
        if result is None:
            continue
        candidate = (result.cer_value, segment.end, result.text_end)
        if best_end is None or candidate[0] < best_end[0]:
            best_end = candidate
    if (
        best_start is None
        or best_end is None
        or best_start[0] > params.policy.middle
        or best_end[0] > params.policy.middle
    ):
        raise NoViableAlignment("no boundary candidate within the reject threshold")
    _, audio_start, text_start = best_start
    _, audio_end, text_end = best_end
    if audio_start >= audio_end or text_start >= text_end:
        raise NoViableAlignment("boundary candidates crossed")
    return audio_start, audio_end, text_start, text_end


def forced_align(
    audio: AudioBuffer,
    text: str,
    backends: list[Backend],
    params: AlignParams | None = None,
    *,
    file_id: str = "file",
    wav_path: str | None = None,
    stats: TranscribeStats | None = None,
) -> tuple[list[ChunkRecord], list[Rejection]]:
    """Align every silence-bounded chunk of ``audio`` against ``text``.

    Inputs are assumed start/end aligned.  Returns accepted records (text
    spans disjoint and increasing) and rejections in chunk order.
    """
    params = params or AlignParams()
    segments = segment_by_silence(audio, params.bounds, params.silence)
    cursor = Cursor()
    records: list[ChunkRecord] = []
    rejections: list[Rejection] = []
    for index, segment in enumerate(segments):
        if segment.duration_s > MAX_CHUNK_SECONDS:
            rejections.append(
                Rejection("segment too long to transcribe", segment=segment, chunk_index=index)
            )
            continue
        chunk = AudioChunk(audio, segment, f"{file_id}-{index:05d}", wav_path)
        try:
            transcripts = transcribe_chunk(chunk, backends, stats=stats)
        except AllBackendsFailed as exc:
            rejections.append(Rejection(str(exc), segment=segment, chunk_index=index))
            continue
        outcome = match_hypotheses(text, cursor, transcripts, params)
        if isinstance(outcome, Rejection):
            rejections.append(replace(outcome, segment=segment, chunk_index=index))
            # A rejection may mean extra audio (repeat, ad-lib) that
            # consumed no text at all, so never advance beyond what the
            # window can reach back over; under-advance on genuinely
            # consumed text is recovered by the forward slack and the
            # exact resync at the next accepted chunk.
            estimate = min(len(transcripts[0].normalized), params.window.slack_back)
            cursor.advance_estimate(estimate, len(text))
            continue
        result = outcome.result
        records.append(
            ChunkRecord(
                file_id=file_id,
                chunk_index=index,
                audio=segment,
                matched_text=result.extract(text),
                cer=result.cer_value,
                quality=result.quality,
                search_type=result.search_type,
                backend_id=outcome.backend_id,
                transcripts_tried=outcome.transcripts_tried,
                flags=segment.flags,
                text_span=result.span_a,
                gap_span=result.span_b,
            )
        )
        cursor.advance_to(result.text_end)
    return records, rejections
