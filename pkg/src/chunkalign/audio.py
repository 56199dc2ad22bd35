"""WAV decoding, silence detection and duration-bounded segmentation.

Audio is held as normalized float samples in an ``AudioBuffer``.  Silence
is detected per fixed-length analysis frame from RMS energy in dBFS;
segmentation walks the speech/silence layout, merging short pieces and
re-splitting long ones until every chunk fits the configured duration
bounds (with a small tolerated overshoot for otherwise unmergeable
leftovers).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

OVERSHOOT_TOLERANCE = 1.05
# Relaxation schedule for over-length pieces: raise the silence floor and
# halve the required silence length, then fall back to a hard cut at the
# quietest frame inside the feasible region.
RELAX_DB_STEP = 6.0
RELAX_ROUNDS = 3

FLAG_OVERLENGTH = "OVERLENGTH"
FLAG_UNDERLENGTH = "UNDERLENGTH"


class MalformedContainer(ValueError):
    """The byte stream is not a well-formed RIFF/WAVE container."""


class UnsupportedEncoding(ValueError):
    """The container is valid but the codec or layout is not supported."""


@dataclass(frozen=True)
class AudioBuffer:
    """Decoded audio: float samples in [-1, 1] at a fixed rate.

    ``samples`` has shape (frames,) for mono and (frames, 2) for stereo.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def frame_count(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return self.frame_count / self.sample_rate

    def slice(self, start: int, end: int) -> "AudioBuffer":
        return AudioBuffer(self.samples[start:end], self.sample_rate)


@dataclass(frozen=True)
class Segment:
    """Half-open sample interval [start, end) into one buffer."""

    start: int
    end: int
    sample_rate: int
    flags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad segment bounds [{self.start}, {self.end})")

    @property
    def duration_s(self) -> float:
        return (self.end - self.start) / self.sample_rate


@dataclass(frozen=True)
class SilenceParams:
    threshold_db: float = -40.0
    min_silence_s: float = 0.5
    frame_s: float = 0.010

    def __post_init__(self) -> None:
        if self.threshold_db >= 0:
            raise ValueError("threshold_db must be negative (dBFS)")
        if self.min_silence_s <= 0 or self.frame_s <= 0:
            raise ValueError("durations must be positive")


@dataclass(frozen=True)
class DurationBounds:
    min_s: float = 2.0
    max_s: float = 12.0

    def __post_init__(self) -> None:
        if not (0 < self.min_s < self.max_s):
            raise ValueError("need 0 < min_s < max_s")


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode a RIFF/WAVE byte stream (PCM 16-bit or 32-bit float, 1-2 ch).

    Integer samples are scaled by 1/32768 so full-scale negative maps to
    -1.0 exactly; float samples are clipped to [-1, 1].  Stereo is kept;
    ``to_mono`` downmixes separately.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer("missing RIFF/WAVE header")
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedContainer(f"chunk {chunk_id!r} truncated")
        if chunk_id == b"fmt ":
            if size < 16:
                raise MalformedContainer("fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise MalformedContainer("missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if sample_rate <= 0:
        raise MalformedContainer("bad sample rate")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"unsupported channel count {channels}")
    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % (2 * channels)], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % (4 * channels)], dtype="<f4")
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedEncoding(f"format {audio_format} with {bits} bits not supported")
    if channels == 2:
        samples = samples.reshape(-1, 2)
    return AudioBuffer(samples, int(sample_rate))


def encode_wav(buffer: AudioBuffer) -> bytes:
    """Encode as PCM 16-bit little-endian WAV."""
    samples = np.clip(buffer.samples, -1.0, 1.0)
    ints = np.round(samples * 32768.0).clip(-32768, 32767).astype("<i2")
    payload = ints.tobytes()
    channels = buffer.channels
    byte_rate = buffer.sample_rate * channels * 2
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, 1, channels, buffer.sample_rate, byte_rate, channels * 2, 16),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    return header + payload


def to_mono(buffer: AudioBuffer) -> AudioBuffer:
    """Mean-of-channels downmix; identity on mono input."""
    if buffer.channels == 1:
        return buffer
    return AudioBuffer(buffer.samples.mean(axis=1), buffer.sample_rate)


def _frame_rms_db(buffer: AudioBuffer, frame_len: int) -> np.ndarray:
    """Per-frame RMS in dBFS; a trailing partial frame counts as a frame."""
    samples = buffer.samples
    n_full = len(samples) // frame_len
    rms = np.empty(n_full + (1 if len(samples) % frame_len else 0))
    if n_full:
        framed = samples[: n_full * frame_len].reshape(n_full, frame_len)
        rms[:n_full] = np.sqrt((framed * framed).mean(axis=1))
    if len(samples) % frame_len:
        tail = samples[n_full * frame_len :]
        rms[n_full] = np.sqrt((tail * tail).mean())
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(rms)


def detect_silences(buffer: AudioBuffer, params: SilenceParams) -> list[Segment]:
    """Maximal frame-aligned intervals quieter than the threshold.

    Returns sorted, non-overlapping segments at least ``min_silence_s``
    long; empty when no frame run qualifies.
    """
    if buffer.channels != 1:
        raise ValueError("detect_silences expects mono audio")
    frame_len = max(1, int(round(params.frame_s * buffer.sample_rate)))
    if buffer.frame_count == 0:
        return []
    db = _frame_rms_db(buffer, frame_len)
    quiet = (db < params.threshold_db).astype(np.int8)
    min_frames = max(1, int(np.ceil(params.min_silence_s * buffer.sample_rate / frame_len)))
    edges = np.diff(quiet)
    run_starts = np.flatnonzero(edges == 1) + 1
    run_stops = np.flatnonzero(edges == -1) + 1
    if quiet[0]:
        run_starts = np.concatenate(([0], run_starts))
    if quiet[-1]:
        run_stops = np.concatenate((run_stops, [len(quiet)]))
    return [
        _frame_segment(buffer, int(first), int(stop), frame_len)
        for first, stop in zip(run_starts, run_stops)
        if stop - first >= min_frames
    ]


def _frame_segment(buffer: AudioBuffer, first: int, stop: int, frame_len: int) -> Segment:
    return Segment(
        first * frame_len,
        min(stop * frame_len, buffer.frame_count),
        buffer.sample_rate,
    )


def _speech_pieces(buffer: AudioBuffer, silences: list[Segment]) -> list[tuple[int, int]]:
    pieces = []
    cursor = 0
    for silence in silences:
        if silence.start > cursor:
            pieces.append((cursor, silence.start))
        cursor = silence.end
    if cursor < buffer.frame_count:
        pieces.append((cursor, buffer.frame_count))
    return pieces


class _StripAware:
    """Duration arithmetic net of what ``strip_long_silences`` removes.

    Holds the silences detected at strip-level parameters (absolute
    coordinates); the effective duration of a span subtracts the part of
    each contained silence beyond the cap, so every bound decision here
    matches the duration the written chunk will actually have.
    """

    def __init__(self, buffer: AudioBuffer, params: SilenceParams, cap_s: float):
        self.rate = buffer.sample_rate
        self.cap_s = cap_s
        self.silences = detect_silences(buffer, params)

    def effective(self, start: int, end: int) -> float:
        span = (end - start) / self.rate
        for silence in self.silences:
            lo = max(start, silence.start)
            hi = min(end, silence.end)
            if hi > lo:
                span -= max(0.0, (hi - lo) / self.rate - self.cap_s)
        return span

    def silence_run_at(self, sample: int) -> tuple[int, int] | None:
        for silence in self.silences:
            if silence.start <= sample < silence.end:
                return silence.start, silence.end
        return None


def segment_by_silence(
    buffer: AudioBuffer,
    bounds: DurationBounds | None = None,
    params: SilenceParams | None = None,
    *,
    silence_cap_s: float = 1.0,
) -> list[Segment]:
    """Contiguous speech chunks within the duration bounds.

    Speech pieces between detected silences merge greedily until long
    enough; merges that would push a chunk past the tolerated maximum are
    refused, leaving an UNDERLENGTH-flagged leftover only when neither
    neighbor can absorb it.  Pieces beyond the maximum re-run detection
    with progressively relaxed parameters and finally hard-cut at the
    quietest frame.  All duration decisions use the post-stripping
    (effective) duration, so written chunks respect the bounds after
    long internal silences are capped.
    """
    bounds = bounds or DurationBounds()
    params = params or SilenceParams()
    if buffer.channels != 1:
        raise ValueError("segment_by_silence expects mono audio")
    ruler = _StripAware(buffer, params, silence_cap_s)
    pieces = _speech_pieces(buffer, ruler.silences)
    if not pieces:
        return []
    merged = _merge_pieces(pieces, ruler, bounds)
    out: list[Segment] = []
    for start, end, flags in merged:
        out.extend(_split_long(buffer, start, end, bounds, params, ruler, flags))
    return out


def _merge_pieces(
    pieces: list[tuple[int, int]],
    ruler: _StripAware,
    bounds: DurationBounds,
) -> list[tuple[int, int, frozenset[str]]]:
    cap = bounds.max_s * OVERSHOOT_TOLERANCE
    groups: list[tuple[int, int, frozenset[str]]] = []

    def emit_short(span: tuple[int, int]) -> None:
        # too short to stand alone: join the previous group when that
        # stays within tolerance, otherwise keep it flagged
        if groups:
            prev = groups[-1]
            joined = ruler.effective(prev[0], span[1])
            if joined <= cap:
                flags = prev[2] | ({FLAG_OVERLENGTH} if joined > bounds.max_s else set())
                groups[-1] = (prev[0], span[1], frozenset(flags))
                return
        groups.append((span[0], span[1], frozenset({FLAG_UNDERLENGTH})))

    current: tuple[int, int] | None = None
    for start, end in pieces:
        if current is None:
            current = (start, end)
        elif ruler.effective(current[0], end) <= cap:
            current = (current[0], end)
        else:
            emit_short(current)
            current = (start, end)
        if ruler.effective(current[0], current[1]) >= bounds.min_s:
            groups.append((current[0], current[1], frozenset()))
            current = None
    if current is not None:
        emit_short(current)
    return groups


def _split_long(
    buffer: AudioBuffer,
    start: int,
    end: int,
    bounds: DurationBounds,
    params: SilenceParams,
    ruler: _StripAware,
    flags: frozenset[str],
    depth: int = 0,
) -> list[Segment]:
    rate = buffer.sample_rate
    effective = ruler.effective(start, end)
    if effective <= bounds.max_s * OVERSHOOT_TOLERANCE:
        seg_flags = flags | ({FLAG_OVERLENGTH} if effective > bounds.max_s else set())
        return [Segment(start, end, rate, frozenset(seg_flags))]
    if depth < RELAX_ROUNDS:
        relaxed = SilenceParams(
            threshold_db=min(-1.0, params.threshold_db + RELAX_DB_STEP),
            min_silence_s=params.min_silence_s / 2,
            frame_s=params.frame_s,
        )
        sub = buffer.slice(start, end)
        inner = detect_silences(sub, relaxed)
        pieces = [(start + lo, start + hi) for lo, hi in _speech_pieces(sub, inner)]
        if len(pieces) > 1:
            merged = _merge_pieces(pieces, ruler, bounds)
            out: list[Segment] = []
            for s, e, fl in merged:
                out.extend(
                    _split_long(buffer, s, e, bounds, relaxed, ruler, flags | fl, depth + 1)
                )
            return out
        return _split_long(buffer, start, end, bounds, relaxed, ruler, flags, depth + 1)
    return _hard_cut(buffer, start, end, bounds, params, ruler, flags)


def _hard_cut(
    buffer: AudioBuffer,
    start: int,
    end: int,
    bounds: DurationBounds,
    params: SilenceParams,
    ruler: _StripAware,
    flags: frozenset[str],
) -> list[Segment]:
    """Cut at the quietest frame while both sides stay within bounds.

    A cut landing inside a strip-level silence run skips the whole run,
    so neither side keeps a silent stub at the seam.
    """
    rate = buffer.sample_rate
    cap = bounds.max_s * OVERSHOOT_TOLERANCE
    out: list[Segment] = []
    frame_len = max(1, int(round(params.frame_s * rate)))

    def emit(lo: int, hi: int) -> None:
        effective = ruler.effective(lo, hi)
        extra: set[str] = set()
        if effective > bounds.max_s:
            extra.add(FLAG_OVERLENGTH)
        if effective < bounds.min_s:
            extra.add(FLAG_UNDERLENGTH)
        out.append(Segment(lo, hi, rate, flags | extra))

    while ruler.effective(start, end) > cap:
        duration = (end - start) / rate
        # Prefer cuts leaving both sides in bounds; when the piece is too
        # long for that, keep the left side in bounds and loop on the rest.
        cut_lo = max(bounds.min_s, duration - bounds.max_s)
        cut_hi = min(bounds.max_s, duration - bounds.min_s)
        if cut_hi < cut_lo:
            cut_lo = bounds.min_s
            cut_hi = min(bounds.max_s, duration - bounds.min_s)
            if cut_hi < cut_lo:
                break  # bounds too tight to split this piece at all
        lo_sample = start + int(cut_lo * rate)
        hi_sample = max(start + int(cut_hi * rate), lo_sample + frame_len)
        db = _frame_rms_db(buffer.slice(lo_sample, hi_sample), frame_len)
        cut = min(lo_sample + int(np.argmin(db)) * frame_len, end - 1)
        left_end, right_start = cut, cut
        run = ruler.silence_run_at(cut)
        if run is not None and run[0] > start and run[1] < end:
            left_end, right_start = run
        if (left_end - start) / rate < bounds.min_s:
            left_end, right_start = cut, cut
        emit(start, left_end)
        start = right_start
    emit(start, end)
    return out


def strip_long_silences(
    buffer: AudioBuffer,
    max_silence_s: float = 1.0,
    params: SilenceParams | None = None,
) -> AudioBuffer:
    """Shorten every detected silence to at most ``max_silence_s``.

    The leading portion of each long silence is kept; speech samples are
    untouched and order is preserved.
    """
    params = params or SilenceParams()
    if buffer.channels != 1:
        raise ValueError("strip_long_silences expects mono audio")
    keep = int(round(max_silence_s * buffer.sample_rate))
    spans: list[np.ndarray] = []
    cursor = 0
    for silence in detect_silences(buffer, params):
        length = silence.end - silence.start
        if length <= keep:
            continue
        spans.append(buffer.samples[cursor : silence.start + keep])
        cursor = silence.end
    spans.append(buffer.samples[cursor:])
    return AudioBuffer(np.concatenate(spans), buffer.sample_rate)
