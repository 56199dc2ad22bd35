"""Edit distance and CER tests against plain DP oracles."""

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chunkalign.distance import EmptyReference, cer, levenshtein, prefix_distances, str_codes
from oracles import levenshtein_slow, prefix_row


class TestLevenshtein:
    def test_identity(self):
        assert levenshtein("abc", "abc") == 0

    def test_single_substitution(self):
        assert levenshtein("abc", "abd") == 1

    def test_empty_sides(self):
        assert levenshtein("", "abc") == 3
        assert levenshtein("ab", "") == 2

    def test_exhaustive_small_alphabet(self):
        strings = [
            "".join(p)
            for length in range(4)
            for p in itertools.product("abc", repeat=length)
        ]
        for a in strings:
            for b in strings:
                assert levenshtein(a, b) == levenshtein_slow(a, b)

    @given(st.text(alphabet="abcx ", max_size=80), st.text(alphabet="abcx ", max_size=80))
    @settings(max_examples=200)
    def test_matches_oracle_random(self, a, b):
        assert levenshtein(a, b) == levenshtein_slow(a, b)

    def test_vector_path_matches_oracle(self):
        rng = random.Random(7)
        for _ in range(20):
            a = "".join(rng.choice("abcdef ") for _ in range(rng.randint(60, 120)))
            b = "".join(rng.choice("abcdef ") for _ in range(rng.randint(60, 120)))
            assert levenshtein(a, b) == levenshtein_slow(a, b)


class TestPrefixRows:
    @given(st.text(alphabet="abz ", max_size=30), st.text(alphabet="abz ", max_size=20))
    @settings(max_examples=150)
    def test_all_prefixes(self, a, b):
        rows = prefix_distances(str_codes(a), str_codes(b))
        oracle_rows = prefix_row(a, b)
        for p in range(len(a) + 1):
            expected = levenshtein_slow(a[:p], b)
            assert rows[p] == expected
            assert oracle_rows[p] == expected


class TestCer:
    def test_identity(self):
        assert cer("abc", "abc") == 0.0

    def test_one_third(self):
        assert cer("abc", "abd") == pytest.approx(1 / 3)

    def test_all_deletions(self):
        assert cer("ab", "") == 1.0

    def test_normalizes_before_compare(self):
        assert cer("Hello, world!", "hello world") == 0.0

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            cer("...", "anything")

    def test_can_exceed_one(self):
        assert cer("a", "abcd") == 3.0
