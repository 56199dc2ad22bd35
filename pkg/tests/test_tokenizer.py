"""Sentence tokenization tests with a deterministic dictionary tagger."""

import sys

import pytest

from chunkalign.tokenizer import (
    TAG_EZAFE,
    TAG_OTHER,
    TAG_VERB,
    DictionaryTagger,
    LeadingEzafe,
    SubprocessTagger,
    TaggedToken,
    TaggerFailure,
    WordGroup,
    group_ezafe,
    split_sentences,
)


def tok(i, tag, surface="w"):
    return TaggedToken(surface, tag, i)


class TestGroupEzafe:
    def test_run_attaches_to_head(self):
        tokens = [tok(0, TAG_OTHER), tok(1, TAG_EZAFE), tok(2, TAG_EZAFE), tok(3, TAG_OTHER)]
        groups = group_ezafe(tokens)
        assert [[t.index for t in g.tokens] for g in groups] == [[0, 1, 2], [3]]

    def test_no_ezafe_gives_singletons(self):
        tokens = [tok(i, TAG_OTHER) for i in range(3)]
        assert [[t.index for t in g.tokens] for g in group_ezafe(tokens)] == [[0], [1], [2]]

    def test_alternating(self):
        tokens = [tok(0, TAG_OTHER), tok(1, TAG_EZAFE), tok(2, TAG_OTHER), tok(3, TAG_EZAFE)]
        assert [[t.index for t in g.tokens] for g in group_ezafe(tokens)] == [[0, 1], [2, 3]]

    def test_leading_ezafe_rejected(self):
        with pytest.raises(LeadingEzafe):
            group_ezafe([tok(0, TAG_EZAFE)])

    def test_partition_covers_all_tokens(self):
        tokens = [
            tok(i, TAG_EZAFE if i % 3 == 1 else TAG_OTHER, f"w{i}") for i in range(10)
        ]
        groups = group_ezafe(tokens)
        seen = [t.index for g in groups for t in g.tokens]
        assert seen == list(range(10))


def make_tagger(verbs=(), ezafe=()):
    mapping = {w: TAG_VERB for w in verbs}
    mapping.update({w: TAG_EZAFE for w in ezafe})
    return DictionaryTagger(mapping)


class TestSplitSentences:
    def test_short_punctuated_text_untouched(self):
        text = "One short line. Another one here! A third?"
        out = split_sentences(text, make_tagger(), 2, 20)
        assert out == ["One short line.", "Another one here!", "A third?"]

    def test_long_sentence_splits_after_verbs(self):
        words = [f"w{i}" for i in range(40)]
        words[12] = "went"
        words[25] = "stood"
        text = " ".join(words)
        out = split_sentences(text, make_tagger(verbs=["went", "stood"]), 3, 20)
        assert out[0].split()[-1] == "went"
        assert out[1].split()[-1] == "stood"
        assert " ".join(out).split() == words

    def test_conjunction_stays_with_verb(self):
        words = [f"w{i}" for i in range(30)]
        words[10] = "ran"
        words[11] = "and"
        text = " ".join(words)
        out = split_sentences(text, make_tagger(verbs=["ran"]), 3, 15)
        assert out[0].split()[-1] == "and"
        assert out[0].split()[-2] == "ran"

    def test_adjacent_symbols_carried_with_verb(self):
        words = [f"w{i}" for i in range(30)]
        words[10] = "ran"
        words[11] = "-"
        text = " ".join(words)
        out = split_sentences(text, make_tagger(verbs=["ran"]), 3, 15)
        assert out[0].split()[-1] == "-"

    def test_no_split_inside_ezafe_group(self):
        # the verb's group extends over the following ezafe tokens
        words = ["start", "verbish", "linked", "more"] + [f"w{i}" for i in range(22)]
        text = " ".join(words)
        tagger = make_tagger(verbs=["verbish"], ezafe=["linked"])
        out = split_sentences(text, tagger, 2, 12)
        first = out[0].split()
        assert "verbish" in first and "linked" in first
        assert first[-1] != "verbish"

    def test_no_boundary_emits_whole(self):
        words = [f"w{i}" for i in range(25)]
        out = split_sentences(" ".join(words), make_tagger(), 3, 10)
        assert out == [" ".join(words)]

    def test_min_len_merges_leftward(self):
        words = [f"w{i}" for i in range(20)]
        words[16] = "went"  # boundary at 17 leaves a 3-token tail
        out = split_sentences(" ".join(words), make_tagger(verbs=["went"]), 5, 17)
        assert len(out) == 1  # tail merged back left

    def test_token_order_preserved(self):
        words = [f"w{i}" for i in range(60)]
        for idx in (7, 19, 33, 47):
            words[idx] = f"v{idx}"
        tagger = make_tagger(verbs=[f"v{i}" for i in (7, 19, 33, 47)])
        out = split_sentences(" ".join(words), tagger, 4, 14)
        assert " ".join(out).split() == words
        for piece in out:
            assert len(piece.split()) <= 14

    def test_tagger_failure_carries_sentence(self):
        class Boom:
            def tag(self, tokens):
                raise RuntimeError("model offline")

        words = " ".join(f"w{i}" for i in range(30))
        with pytest.raises(TaggerFailure) as err:
            split_sentences(words, Boom(), 2, 10)
        assert "w0" in str(err.value)

    def test_bounds_validated(self):
        with pytest.raises(ValueError):
            split_sentences("a b c", make_tagger(), 5, 5)


TAGGER_SCRIPT = r"""
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    tags = ["VERB" if t.startswith("v") else "OTHER" for t in req["tokens"]]
    print(json.dumps({"tags": tags}), flush=True)
"""


class TestSubprocessTagger:
    @pytest.fixture
    def tagger_cmd(self, tmp_path):
        script = tmp_path / "tagger.py"
        script.write_text(TAGGER_SCRIPT, encoding="utf-8")
        return f"{sys.executable} {script}"

    def test_round_trip(self, tagger_cmd):
        tagger = SubprocessTagger(tagger_cmd)
        try:
            tags = tagger.tag(["alpha", "vrun", "beta"])
            assert tags == ["OTHER", "VERB", "OTHER"]
            tags = tagger.tag(["vgo"])
            assert tags == ["VERB"]
        finally:
            tagger.close()

    def test_used_by_split(self, tagger_cmd):
        tagger = SubprocessTagger(tagger_cmd)
        try:
            words = [f"w{i}" for i in range(24)]
            words[11] = "vwent"
            out = split_sentences(" ".join(words), tagger, 3, 14)
            assert out[0].split()[-1] == "vwent"
        finally:
            tagger.close()


class TestDictionaryTaggerFile:
    def test_from_file(self, tmp_path):
        path = tmp_path / "tags.json"
        path.write_text('{"ran": "VERB", "of": "EZAFE"}', encoding="utf-8")
        tagger = DictionaryTagger.from_file(path)
        assert tagger.tag(["ran", "of", "house", "ran."]) == [
            "VERB",
            "EZAFE",
            "OTHER",
            "VERB",
        ]
