"""Protocol conformance for the adapter in echo mode.

The harness drives the adapter exactly as the aligner does: JSON
requests pipelined on stdin, one JSON response per line expected back in
request order.
"""

import json
import os
import struct
import subprocess
import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parents[1] / "src"


def write_wav(path: Path, n_samples: int = 800, rate: int = 8000) -> None:
    frames = struct.pack(f"<{n_samples}h", *([100] * n_samples))
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(frames)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16),
            b"data",
            struct.pack("<I", len(frames)),
        ]
    )
    path.write_bytes(header + frames)


def request(ident: str, wav: Path, start: int = 0, end: int = 800) -> str:
    return json.dumps(
        {
            "id": ident,
            "wav_path": str(wav),
            "start_sample": start,
            "end_sample": end,
            "sample_rate": 8000,
        },
        ensure_ascii=False,
    )


@pytest.fixture
def adapter():
    env = dict(os.environ)
    env["PYTHONPATH"] = str(SRC) + os.pathsep + env.get("PYTHONPATH", "")
    proc = subprocess.Popen(
        [sys.executable, "-m", "asr_adapter", "--model", "echo"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        encoding="utf-8",
        env=env,
        bufsize=1,
    )
    yield proc
    proc.stdin.close()
    proc.wait(timeout=10)


class TestEchoConformance:
    def test_hundred_pipelined_requests_in_order(self, adapter, tmp_path):
        texts = {}
        for idx in range(100):
            wav = tmp_path / f"c{idx:03d}.wav"
            write_wav(wav)
            text = f"chunk {idx} متن فارسی — café {idx}"
            (tmp_path / f"c{idx:03d}.txt").write_text(text, encoding="utf-8")
            texts[f"req-{idx}"] = text
            adapter.stdin.write(request(f"req-{idx}", wav) + "\n")
        adapter.stdin.flush()
        for idx in range(100):
            response = json.loads(adapter.stdout.readline())
            assert response["id"] == f"req-{idx}"
            assert response["text"] == texts[f"req-{idx}"]

    def test_unicode_round_trips_byte_exact(self, adapter, tmp_path):
        wav = tmp_path / "u.wav"
        write_wav(wav)
        payload = "آوای ماندگار\n two lines \U0001f3a4"
        (tmp_path / "u.txt").write_bytes(payload.encode("utf-8"))
        adapter.stdin.write(request("u1", wav) + "\n")
        adapter.stdin.flush()
        response = json.loads(adapter.stdout.readline())
        assert response["id"] == "u1"
        assert response["text"].encode("utf-8") == payload.encode("utf-8")

    def test_missing_file_yields_error_with_same_id(self, adapter, tmp_path):
        adapter.stdin.write(request("gone", tmp_path / "missing.wav") + "\n")
        adapter.stdin.flush()
        response = json.loads(adapter.stdout.readline())
        assert response["id"] == "gone"
        assert "error" in response
        assert "text" not in response

    def test_missing_sidecar_yields_error(self, adapter, tmp_path):
        wav = tmp_path / "bare.wav"
        write_wav(wav)
        adapter.stdin.write(request("bare", wav) + "\n")
        adapter.stdin.flush()
        response = json.loads(adapter.stdout.readline())
        assert response["id"] == "bare"
        assert "sidecar" in response["error"]

    def test_malformed_lines_never_crash(self, adapter, tmp_path):
        wav = tmp_path / "ok.wav"
        write_wav(wav)
        (tmp_path / "ok.txt").write_text("still alive", encoding="utf-8")
        bad_lines = [
            "this is not json",
            '{"id": "half"',
            '["a", "list"]',
            '{"no_id": true}',
            json.dumps({"id": "noline", "wav_path": 42}),
        ]
        for line in bad_lines:
            adapter.stdin.write(line + "\n")
        adapter.stdin.write(request("after", wav) + "\n")
        adapter.stdin.flush()
        responses = [json.loads(adapter.stdout.readline()) for _ in range(len(bad_lines) + 1)]
        for response in responses[:-1]:
            assert "error" in response
        assert responses[-1] == {"id": "after", "text": "still alive"}
        assert adapter.poll() is None  # process survived everything

    def test_blank_lines_skipped(self, adapter, tmp_path):
        wav = tmp_path / "b.wav"
        write_wav(wav)
        (tmp_path / "b.txt").write_text("blank ok", encoding="utf-8")
        adapter.stdin.write("\n\n" + request("b1", wav) + "\n")
        adapter.stdin.flush()
        response = json.loads(adapter.stdout.readline())
        assert response == {"id": "b1", "text": "blank ok"}


class TestStartupFailure:
    def test_unloadable_model_exits_nonzero_with_diagnostic(self, tmp_path):
        env = dict(os.environ)
        env["PYTHONPATH"] = str(SRC) + os.pathsep + env.get("PYTHONPATH", "")
        env["HF_HUB_OFFLINE"] = "1"
        env["TRANSFORMERS_OFFLINE"] = "1"
        proc = subprocess.run(
            [sys.executable, "-m", "asr_adapter", "--model", "no/such-model-anywhere"],
            input="",
            capture_output=True,
            text=True,
            env=env,
            timeout=120,
        )
        assert proc.returncode != 0
        assert "failed to start" in proc.stderr


class TestWavSlicing:
    def test_read_wav_slice(self, tmp_path):
        from asr_adapter.server import read_wav_slice

        wav = tmp_path / "s.wav"
        write_wav(wav, n_samples=100)
        samples, rate = read_wav_slice(str(wav), 10, 20)
        assert rate == 8000
        assert len(samples) == 10
        assert all(abs(v - 100 / 32768) < 1e-9 for v in samples)

    def test_range_clipping(self, tmp_path):
        from asr_adapter.server import read_wav_slice

        wav = tmp_path / "s.wav"
        write_wav(wav, n_samples=50)
        samples, _ = read_wav_slice(str(wav), 40, 400)
        assert len(samples) == 10

    def test_rejects_stereo(self, tmp_path):
        from asr_adapter.server import RequestError, read_wav_slice

        frames = struct.pack("<4h", 1, 2, 3, 4)
        header = b"".join(
            [
                b"RIFF",
                struct.pack("<I", 36 + len(frames)),
                b"WAVE",
                b"fmt ",
                struct.pack("<IHHIIHH", 16, 1, 2, 8000, 32000, 4, 16),
                b"data",
                struct.pack("<I", len(frames)),
            ]
        )
        wav = tmp_path / "st.wav"
        wav.write_bytes(header + frames)
        with pytest.raises(RequestError):
            read_wav_slice(str(wav), 0, 2)
