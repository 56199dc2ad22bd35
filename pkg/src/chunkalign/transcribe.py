"""Ranked multi-backend transcription with degeneracy and length filtering.

A chunk of audio fans out to every configured recognizer backend.  Broken
outputs are dropped in two passes: degenerate text (empty or looping on a
repeated token pattern), then transcripts shorter than 80% of the longest
survivor, which catches recognizers that truncate.  What remains is
returned sorted by the backends' reliability ranks, most reliable first,
so downstream matching can stop at the first hypothesis that fits.

Backends come in four flavors: an external process speaking the
line-delimited JSON protocol, a directory of precomputed transcripts, an
in-process callable, and a scripted mock (optionally corrupting) used by
tests and experiments.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import shlex
import string
import subprocess
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from queue import Empty, Queue
from typing import Callable, Protocol

import numpy as np

from .audio import AudioBuffer, Segment
from .textprep import cer_normalize

log = logging.getLogger(__name__)

DEFAULT_LENGTH_RATIO = Fraction(4, 5)
DEFAULT_REPEAT_LIMIT = 4
DEFAULT_TIMEOUT_S = 120.0
MAX_CHUNK_SECONDS = 20.0

MOCK_ALPHABET = string.ascii_lowercase


class BackendError(Exception):
    """One backend failed on one chunk; the run degrades gracefully."""


class AllBackendsFailed(Exception):
    """No transcript survived invocation and filtering for a chunk."""


@dataclass(frozen=True)
class BackendSpec:
    """Configuration of one recognizer backend.

    ``invocation`` is either a command line (subprocess protocol) or a
    ``dir:<path>`` reference to precomputed ``<chunk-id>.txt`` files.
    Ranks must be unique; 1 is the most reliable.
    """

    id: str
    reliability_rank: int
    invocation: str

    def __post_init__(self) -> None:
        if self.reliability_rank < 1:
            raise ValueError("reliability_rank starts at 1")
        if not self.id:
            raise ValueError("backend id must be non-empty")


@dataclass(frozen=True)
class Transcript:
    text: str
    backend_id: str
    rank: int
    normalized: str = field(default="")

    def __post_init__(self) -> None:
        if not self.normalized:
            object.__setattr__(self, "normalized", cer_normalize(self.text))


@dataclass(frozen=True)
class AudioChunk:
    """One segment of a buffer, addressed for every backend flavor."""

    buffer: AudioBuffer
    segment: Segment
    chunk_id: str
    wav_path: str | None = None  # mono PCM16 file backing subprocess backends


@dataclass
class TranscribeStats:
    """Per-backend drop counters accumulated across a run."""

    failures: dict[str, int] = field(default_factory=dict)
    degenerate: dict[str, int] = field(default_factory=dict)
    truncated: dict[str, int] = field(default_factory=dict)

    def bump(self, table: dict[str, int], backend_id: str) -> None:
        table[backend_id] = table.get(backend_id, 0) + 1


class Backend(Protocol):
    spec: BackendSpec

    def transcribe(self, chunk: AudioChunk) -> str: ...

    def close(self) -> None: ...


class CallableBackend:
    """In-process backend wrapping a plain function; used heavily by tests."""

    def __init__(self, spec: BackendSpec, fn: Callable[[AudioChunk], str]):
        self.spec = spec
        self._fn = fn

    def transcribe(self, chunk: AudioChunk) -> str:
        return self._fn(chunk)

    def close(self) -> None:
        pass


class PrecomputedBackend:
    """Reads ``<chunk-id>.txt`` files from a per-backend directory."""

    def __init__(self, spec: BackendSpec, directory: str | Path):
        self.spec = spec
        self._dir = Path(directory)

    def transcribe(self, chunk: AudioChunk) -> str:
        path = self._dir / f"{chunk.chunk_id}.txt"
        if not path.is_file():
            raise BackendError(f"no precomputed transcript at {path}")
        return path.read_text(encoding="utf-8")

    def close(self) -> None:
        pass


class SubprocessBackend:
    """Client half of the line-delimited JSON recognizer protocol.

    One request per line on stdin:
      {"id": ..., "wav_path": ..., "start_sample": ..., "end_sample": ...,
       "sample_rate": ...}
    One response per line on stdout: {"id": ..., "text": ...} or
    {"id": ..., "error": ...}.  The process is started lazily and reused.
    """

    def __init__(self, spec: BackendSpec, command: str, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.spec = spec
        self._command = shlex.split(command)
        self._timeout_s = timeout_s
        self._proc: subprocess.Popen | None = None
        self._lines: Queue[str | None] = Queue()

    def _ensure_started(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            self._command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines = Queue()

        def pump(stream, sink: Queue) -> None:
            for line in stream:
                sink.put(line)
            sink.put(None)

        threading.Thread(
            target=pump, args=(self._proc.stdout, self._lines), daemon=True
        ).start()

    def transcribe(self, chunk: AudioChunk) -> str:
        if chunk.wav_path is None:
            raise BackendError("subprocess backend needs a wav_path")
        self._ensure_started()
        assert self._proc is not None and self._proc.stdin is not None
        request = {
            "id": chunk.chunk_id,
            "wav_path": chunk.wav_path,
            "start_sample": chunk.segment.start,
            "end_sample": chunk.segment.end,
            "sample_rate": chunk.segment.sample_rate,
        }
        try:
            self._proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend {self.spec.id} pipe failed: {exc}") from exc
        try:
            line = self._lines.get(timeout=self._timeout_s)
        except Empty:
            raise BackendError(f"backend {self.spec.id} timed out") from None
        if line is None:
            raise BackendError(f"backend {self.spec.id} exited mid-request")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"backend {self.spec.id} protocol violation: {line!r}") from exc
        if response.get("id") != chunk.chunk_id:
            raise BackendError(f"backend {self.spec.id} answered wrong id {response.get('id')!r}")
        if "error" in response:
            raise BackendError(f"backend {self.spec.id}: {response['error']}")
        text = response.get("text")
        if not isinstance(text, str):
            raise BackendError(f"backend {self.spec.id} returned no text field")
        return text

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()  # type: ignore[union-attr]
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None


class ScriptedBackend:
    """Mock recognizer reading from a (sample range -> text) script.

    Returns the text of every script line overlapping the requested
    segment by at least half the line's span.  With ``error_range`` set,
    the text is corrupted by ``mock_corrupt`` with a per-chunk seed, so
    independent instances model independently flaky recognizers.

    Script positions refer to the ``source`` recording's timeline.  A
    chunk may arrive in a trimmed or re-decoded copy of that recording;
    like a real recognizer, the mock goes by audio content, locating the
    chunk's buffer inside the source (via a 16-bit-quantized probe, so a
    PCM16 round trip does not defeat the match).  Without a source the
    chunk coordinates are taken as already source-relative.
    """

    def __init__(
        self,
        spec: BackendSpec,
        script: list[tuple[int, int, str]],
        error_range: tuple[float, float] | None = None,
        seed: int = 0,
        source: AudioBuffer | None = None,
    ):
        self.spec = spec
        self._script = script
        self._error_range = error_range
        self._seed = seed
        self._source_q = _quantize(source.samples) if source is not None else None
        self._offsets: dict[int, int] = {}

    def _offset_of(self, chunk: AudioChunk) -> int:
        if self._source_q is None:
            return 0
        key = id(chunk.buffer.samples)
        if key in self._offsets:
            return self._offsets[key]
        quantized = _quantize(chunk.buffer.samples)
        loud = np.flatnonzero(quantized)
        if loud.size == 0:
            raise BackendError(f"mock backend {self.spec.id}: silent chunk buffer")
        probe_start = int(loud[0])
        probe = quantized[probe_start : probe_start + 64]
        limit = len(self._source_q) - len(probe) + 1
        offset = None
        for cand in np.flatnonzero(self._source_q[:limit] == probe[0]):
            if np.array_equal(self._source_q[cand : cand + len(probe)], probe):
                offset = int(cand) - probe_start
                break
        if offset is None:
            raise BackendError(
                f"mock backend {self.spec.id} cannot locate chunk audio in its source"
            )
        self._offsets[key] = offset
        return offset

    def transcribe(self, chunk: AudioChunk) -> str:
        shift = self._offset_of(chunk)
        lo = chunk.segment.start + shift
        hi = chunk.segment.end + shift
        said = [
            text
            for start, end, text in self._script
            if min(hi, end) - max(lo, start) >= (end - start) / 2
        ]
        if not said:
            raise BackendError(f"mock backend {self.spec.id} has no line for [{lo}, {hi})")
        text = " ".join(said)
        if self._error_range is not None:
            text = mock_corrupt(
                text,
                self._error_range,
                seed=derive_seed(self._seed, self.spec.id, lo),
            )
        return text

    def close(self) -> None:
        pass


def _quantize(samples) -> "np.ndarray":
    return np.round(np.clip(samples, -1.0, 1.0) * 32768.0).clip(-32768, 32767).astype(np.int16)


def build_backend(spec: BackendSpec) -> Backend:
    if spec.invocation.startswith("dir:"):
        return PrecomputedBackend(spec, spec.invocation[4:])
    return SubprocessBackend(spec, spec.invocation)


def is_degenerate(text: str, repeat_limit: int = DEFAULT_REPEAT_LIMIT) -> bool:
    """True for empty-after-normalization or stuck-in-a-loop output.

    A token or token bigram repeated ``repeat_limit`` or more times in a
    row marks the loop case recognizers fall into.
    """
    normalized = cer_normalize(text)
    if not normalized:
        return True
    tokens = normalized.split()
    run = 1
    for prev, cur in zip(tokens, tokens[1:]):
        run = run + 1 if cur == prev else 1
        if run >= repeat_limit:
            return True
    pairs = list(zip(tokens, tokens[1:]))
    run = 1
    for idx in range(2, len(pairs), 2):
        run = run + 1 if pairs[idx] == pairs[idx - 2] else 1
        if run >= repeat_limit:
            return True
    run = 1
    for idx in range(3, len(pairs), 2):
        run = run + 1 if pairs[idx] == pairs[idx - 2] else 1
        if run >= repeat_limit:
            return True
    return False


def derive_seed(*parts: object) -> int:
    """Stable sub-seed derivation, independent of hash randomization."""
    digest = hashlib.blake2b("|".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def mock_corrupt(
    text: str,
    rate_range: tuple[float, float],
    seed: int,
    alphabet: str = MOCK_ALPHABET,
) -> str:
    """Randomly resample non-space characters at a drawn error rate.

    The rate is drawn once, uniformly from ``rate_range``; each non-space
    character is then independently replaced by a uniform alphabet
    character with that probability.  Deterministic in (text, range, seed).
    """
    lo, hi = rate_range
    if not (0 <= lo <= hi <= 1):
        raise ValueError(f"bad rate range [{lo}, {hi}]")
    rng = random.Random(derive_seed("corrupt", lo, hi, seed, text))
    rate = rng.uniform(lo, hi)
    out = []
    for ch in text:
        if not ch.isspace() and rng.random() < rate:
            out.append(rng.choice(alphabet))
        else:
            out.append(ch)
    return "".join(out)


def transcribe_chunk(
    chunk: AudioChunk,
    backends: list[Backend],
    *,
    length_ratio: Fraction = DEFAULT_LENGTH_RATIO,
    repeat_limit: int = DEFAULT_REPEAT_LIMIT,
    stats: TranscribeStats | None = None,
) -> list[Transcript]:
    """All eligible transcripts for one chunk, most reliable first.

    Backend failures are logged and skipped.  Degenerate outputs go
    first; the survivors shorter than ``length_ratio`` of the longest
    (normalized length, exact rational comparison) go second.  Raises
    ``AllBackendsFailed`` when nothing remains.
    """
    if not backends:
        raise ValueError("at least one backend required")
    if chunk.segment.duration_s > MAX_CHUNK_SECONDS:
        raise ValueError(
            f"chunk of {chunk.segment.duration_s:.1f}s exceeds {MAX_CHUNK_SECONDS}s"
        )
    candidates: list[Transcript] = []
    for backend in backends:
        try:
            text = backend.transcribe(chunk)
        except BackendError as exc:
            log.warning("backend %s failed on %s: %s", backend.spec.id, chunk.chunk_id, exc)
            if stats is not None:
                stats.bump(stats.failures, backend.spec.id)
            continue
        transcript = Transcript(text, backend.spec.id, backend.spec.reliability_rank)
        if is_degenerate(text, repeat_limit):
            log.debug("degenerate transcript from %s on %s", backend.spec.id, chunk.chunk_id)
            if stats is not None:
                stats.bump(stats.degenerate, backend.spec.id)
            continue
        candidates.append(transcript)
    if not candidates:
        raise AllBackendsFailed(f"no usable transcript for {chunk.chunk_id}")
    longest = max(len(t.normalized) for t in candidates)
    survivors = []
    for transcript in candidates:
        if len(transcript.normalized) * length_ratio.denominator >= length_ratio.numerator * longest:
            survivors.append(transcript)
        elif stats is not None:
            stats.bump(stats.truncated, transcript.backend_id)
    if not survivors:
        raise AllBackendsFailed(f"all transcripts truncated for {chunk.chunk_id}")
    return sorted(survivors, key=lambda t: t.rank)
