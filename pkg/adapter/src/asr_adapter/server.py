"""Request loop and recognizer backends.

The adapter reads one JSON request per stdin line:

    {"id": ..., "wav_path": ..., "start_sample": ..., "end_sample": ...,
     "sample_rate": ...}

and answers one JSON line per request, in order:

    {"id": ..., "text": ...}    or    {"id": ..., "error": ...}

Malformed requests produce error responses, never a crash; only a
recognizer that fails to load aborts the process (before the loop
starts).  The recognizer is loaded once and reused, since a model load
per chunk would dwarf the recognition time.

Two recognizers ship: ``echo`` returns the contents of the ``.txt``
sidecar next to the referenced WAV (protocol testing without any model
download), and any other model identifier is loaded as a Hugging Face
automatic-speech-recognition pipeline.
"""

from __future__ import annotations

import json
import sys
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import IO


class RequestError(Exception):
    """A malformed or unservable request; reported, not fatal."""


@dataclass(frozen=True)
class AdapterConfig:
    model: str = "echo"
    device: str = "cpu"
    timeout_s: float = 120.0

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model identifier must be non-empty")


def read_wav_slice(path: str, start: int, end: int) -> tuple[list[float], int]:
    """Decode a sample range of a mono PCM16 WAV into floats in [-1, 1]."""
    try:
        with wave.open(path, "rb") as handle:
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            rate = handle.getframerate()
            total = handle.getnframes()
            if channels != 1 or width != 2:
                raise RequestError(
                    f"expected mono PCM16 audio, got {channels} ch x {8 * width} bit"
                )
            start = max(0, min(start, total))
            end = max(start, min(end, total))
            handle.setpos(start)
            raw = handle.readframes(end - start)
    except (OSError, wave.Error) as exc:
        raise RequestError(f"cannot read {path}: {exc}") from exc
    samples = [
        int.from_bytes(raw[i : i + 2], "little", signed=True) / 32768.0
        for i in range(0, len(raw), 2)
    ]
    return samples, rate


class EchoRecognizer:
    """Returns the sidecar transcript stored next to the WAV, verbatim."""

    def transcribe(self, request: dict) -> str:
        wav_path = Path(_field(request, "wav_path", str))
        if not wav_path.is_file():
            raise RequestError(f"no such file: {wav_path}")
        sidecar = wav_path.with_suffix(".txt")
        if not sidecar.is_file():
            raise RequestError(f"no sidecar transcript: {sidecar}")
        return sidecar.read_text(encoding="utf-8")


class PipelineRecognizer:
    """Wraps a Hugging Face automatic-speech-recognition pipeline."""

    def __init__(self, model: str, device: str):
        import numpy as np  # deferred: only the model path needs them
        from transformers import pipeline

        self._np = np
        self._pipe = pipeline(
            "automatic-speech-recognition",
            model=model,
            device=-1 if device == "cpu" else device,
        )

    def transcribe(self, request: dict) -> str:
        wav_path = _field(request, "wav_path", str)
        start = _field(request, "start_sample", int)
        end = _field(request, "end_sample", int)
        samples, rate = read_wav_slice(wav_path, start, end)
        if not samples:
            raise RequestError("empty sample range")
        array = self._np.asarray(samples, dtype=self._np.float32)
        result = self._pipe({"array": array, "sampling_rate": rate})
        return result["text"]


def _field(request: dict, name: str, kind: type):
    value = request.get(name)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise RequestError(f"missing or invalid field {name!r}")
    return value


def load_recognizer(config: AdapterConfig):
    if config.model == "echo":
        return EchoRecognizer()
    return PipelineRecognizer(config.model, config.device)


def serve(config: AdapterConfig, stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> None:
    """Answer protocol requests until stdin closes.

    One response per request line, in request order.  Raises only when
    the recognizer cannot be loaded.
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    recognizer = load_recognizer(config)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        request_id = ""
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise RequestError("request must be a JSON object")
            raw_id = request.get("id", "")
            request_id = raw_id if isinstance(raw_id, str) else str(raw_id)
            response = {"id": request_id, "text": recognizer.transcribe(request)}
        except json.JSONDecodeError as exc:
            response = {"id": request_id, "error": f"bad json: {exc}"}
        except RequestError as exc:
            response = {"id": request_id, "error": str(exc)}
        except Exception as exc:  # recognizer hiccup on one chunk
            response = {"id": request_id, "error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()
