import sys
from pathlib import Path

# Allow running the suite from a clean checkout without installing.
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))


def script_text(script, lo, hi):
    """Text a faithful recognizer would produce for the span [lo, hi)."""
    return " ".join(
        text for start, end, text in script if min(hi, end) - max(lo, start) >= (end - start) / 2
    )


def materialize_corpus(directory, corpus, name):
    """Write a synthetic corpus as <name>.wav/.txt plus a transcripts dir.

    The transcripts directory serves a precomputed backend: it covers the
    boundary-probe chunk ids and every aligned chunk id, derived from the
    corpus script.  Returns (pair_paths, transcripts_dir).
    """
    from chunkalign.audio import encode_wav, segment_by_silence
    from chunkalign.align import AlignParams, start_end_align
    from chunkalign.transcribe import BackendSpec, ScriptedBackend

    directory.mkdir(parents=True, exist_ok=True)
    wav = directory / f"{name}.wav"
    wav.write_bytes(encode_wav(corpus.audio))
    txt = directory / f"{name}.txt"
    txt.write_text(corpus.text, encoding="utf-8")
    transcripts = directory / f"{name}-transcripts"
    transcripts.mkdir(exist_ok=True)
    for seg in segment_by_silence(corpus.audio):
        for tag in ("start", "end"):
            (transcripts / f"{name}-edge-{tag}-{seg.start}.txt").write_text(
                script_text(corpus.script, seg.start, seg.end), encoding="utf-8"
            )
    truth = [
        ScriptedBackend(
            BackendSpec("truth", 1, "dir:unused"), corpus.script, source=corpus.audio
        )
    ]
    a0, a1, _, _ = start_end_align(corpus.audio, corpus.text, truth, AlignParams())
    for idx, seg in enumerate(segment_by_silence(corpus.audio.slice(a0, a1))):
        (transcripts / f"{name}-{idx:05d}.txt").write_text(
            script_text(corpus.script, a0 + seg.start, a0 + seg.end),
            encoding="utf-8",
        )
    return (wav, txt), transcripts
