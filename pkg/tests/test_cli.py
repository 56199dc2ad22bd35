"""CLI subcommand tests driven through ``main``."""

import json

import pytest

from chunkalign.cli import EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main
from chunkalign.synth import make_corpus
from conftest import materialize_corpus


@pytest.fixture
def corpus_dir(tmp_path):
    corpus = make_corpus(8, seed=70)
    (_, _), transcripts = materialize_corpus(tmp_path / "data", corpus, "demo")
    return tmp_path / "data", transcripts, corpus


class TestAlignCommand:
    def test_align_and_stats(self, corpus_dir, tmp_path, capsys):
        data_dir, transcripts, corpus = corpus_dir
        out_dir = tmp_path / "out"
        code = main(
            [
                "align",
                "--input-dir",
                str(data_dir),
                "--output-dir",
                str(out_dir),
                "--backend",
                f"truth=dir:{transcripts}",
            ]
        )
        assert code == EXIT_OK
        assert (out_dir / "manifest.tsv").exists()
        assert (out_dir / "manifest.meta.json").exists()
        assert len(list((out_dir / "chunks").glob("*.wav"))) == len(corpus.script)

        code = main(["stats", str(out_dir / "manifest.tsv"), "--output-dir", str(out_dir / "stats")])
        assert code == EXIT_OK
        report = json.loads((out_dir / "stats" / "stats.json").read_text())
        assert report["accepted"] == len(corpus.script)

    def test_align_partial_failure_exit_code(self, corpus_dir, tmp_path):
        data_dir, transcripts, _ = corpus_dir
        # an extra pair whose transcripts are missing fails start/end alignment
        stray = make_corpus(6, seed=71)
        materialize_corpus(data_dir, stray, "stray")
        for path in (data_dir / "stray-transcripts").glob("*.txt"):
            path.unlink()
        code = main(
            [
                "align",
                "--input-dir",
                str(data_dir),
                "--output-dir",
                str(tmp_path / "out2"),
                "--backend",
                f"truth=dir:{transcripts}",
            ]
        )
        assert code == EXIT_PARTIAL

    def test_config_file_with_flag_overrides(self, corpus_dir, tmp_path):
        data_dir, transcripts, _ = corpus_dir
        config = {
            "input_dir": str(data_dir),
            "output_dir": str(tmp_path / "from-config"),
            "backends": [{"id": "truth", "rank": 1, "invocation": f"dir:{transcripts}"}],
            "thresholds": {"high": 0.05, "middle": 0.2},
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        out_dir = tmp_path / "flag-out"
        code = main(["align", "--config", str(config_path), "--output-dir", str(out_dir)])
        assert code == EXIT_OK
        assert (out_dir / "manifest.tsv").exists()

    def test_missing_inputs_is_config_error(self, tmp_path):
        code = main(["align", "--output-dir", str(tmp_path), "--backend", "x=dir:/nowhere"])
        assert code == EXIT_CONFIG

    def test_bad_backend_flag_is_config_error(self, corpus_dir, tmp_path):
        data_dir, _, _ = corpus_dir
        code = main(["align", "--input-dir", str(data_dir), "--backend", "malformed"])
        assert code == EXIT_CONFIG


class TestEvalBackendsCommand:
    def test_table_output(self, tmp_path, capsys):
        from chunkalign.audio import encode_wav
        import numpy as np
        from chunkalign.audio import AudioBuffer

        chunk_dir = tmp_path / "chunks"
        chunk_dir.mkdir()
        transcripts = tmp_path / "asr"
        transcripts.mkdir()
        rng = np.random.default_rng(1)
        for idx in range(4):
            name = f"c{idx:02d}"
            (chunk_dir / f"{name}.wav").write_bytes(
                encode_wav(AudioBuffer(rng.uniform(-0.4, 0.4, 8000), 8000))
            )
            (chunk_dir / f"{name}.txt").write_text(f"sample text {idx}", encoding="utf-8")
            (transcripts / f"{name}.txt").write_text(f"sample text {idx}", encoding="utf-8")
        code = main(
            [
                "eval-backends",
                "--input-dir",
                str(chunk_dir),
                "--backend",
                f"perfect=dir:{transcripts}",
                "--output-dir",
                str(tmp_path / "eval"),
            ]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "perfect" in out
        assert "0.0000" in out
        payload = json.loads((tmp_path / "eval" / "backend_eval.json").read_text())
        assert payload[0]["mean_cer_all"] == 0.0


class TestRobustnessCommand:
    def test_smoke(self, tmp_path, capsys):
        code = main(
            [
                "robustness",
                "--chunks",
                "8",
                "--seeds",
                "2",
                "--n-backends",
                "3",
                "--range-tops",
                "0.0",
                "0.3",
                "--output-dir",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        table = json.loads((tmp_path / "robustness.json").read_text())
        assert table["total_chunks"] == 8
        assert table["rows"]["multiple_backends_median_rejections"][0] == 0


class TestTokenizeCommand:
    def test_splits_file(self, tmp_path, capsys):
        text_path = tmp_path / "in.txt"
        words = [f"w{i}" for i in range(30)]
        words[9] = "went"
        text_path.write_text(" ".join(words), encoding="utf-8")
        tags = tmp_path / "tags.json"
        tags.write_text('{"went": "VERB"}', encoding="utf-8")
        code = main(
            [
                "tokenize",
                "--input",
                str(text_path),
                "--min-len",
                "3",
                "--max-len",
                "15",
                "--tags",
                str(tags),
            ]
        )
        assert code == EXIT_OK
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 2
        assert lines[0].endswith("went")
