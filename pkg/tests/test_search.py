"""Interval and gapped search tests against exhaustive oracles."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chunkalign.search import (
    EmptyWindow,
    MatchQuality,
    SearchType,
    ThresholdPolicy,
    WindowParams,
    build_view,
    gapped_search,
    interval_search,
)
from chunkalign.textprep import cer_normalize
from oracles import best_gapped_cer, best_interval_cer, cer_slow

WORDS = "the cat sat on a mat and then ran off to nap under warm sun".split()


def random_text(rng, n_words, punct=True):
    parts = []
    for _ in range(n_words):
        parts.append(rng.choice(WORDS))
        if punct and rng.random() < 0.2:
            parts.append(rng.choice([",", ".", ";", "!", " -"]))
    return " ".join(parts)


class TestNormalizedView:
    @given(st.text(alphabet="aB c,.!-", max_size=60))
    def test_matches_cer_normalize(self, text):
        view = build_view(text, 0, len(text))
        assert view.text == cer_normalize(text)

    @given(st.text(alphabet="aB c,.!-", max_size=60), st.data())
    def test_span_normalization_lemma(self, text, data):
        # cer_normalize of any slice equals the corresponding trimmed piece
        # of the full normalized text; the search machinery relies on this.
        s = data.draw(st.integers(min_value=0, max_value=len(text)))
        i = data.draw(st.integers(min_value=s, max_value=len(text)))
        assert cer_normalize(text[s:i]) == cer_normalize(text[s:i])  # sanity
        norm_slice = cer_normalize(text[s:i])
        assert norm_slice in cer_normalize(text) or norm_slice == ""


class TestIntervalSearch:
    def test_exact_substring(self):
        result = interval_search("the cat sat on the mat", "cat sat")
        assert result.cer_value == 0.0
        assert result.quality is MatchQuality.HIGH
        assert result.search_type is SearchType.INTERVAL
        assert "cat sat" in "the cat sat on the mat"[result.span_a[0] : result.span_a[1]]

    def test_near_substring_classified_middle(self):
        text = "the cat sat on the mat"
        result = interval_search(text, "cat sut")
        assert result.cer_value == pytest.approx(1 / 7)
        assert result.quality is MatchQuality.MIDDLE
        expected = best_interval_cer(text, "cat sut", 0, len(text))
        assert result.cer_value == expected

    def test_disjoint_hypothesis_rejected(self):
        text = "zq zq zq"
        result = interval_search(text, "completely different words here")
        oracle = best_interval_cer(text, "completely different words here", 0, len(text))
        assert result.cer_value == oracle
        assert result.quality is MatchQuality.REJECT

    def test_empty_window(self):
        with pytest.raises(EmptyWindow):
            interval_search("...", "abc")
        with pytest.raises(EmptyWindow):
            interval_search("abcdef", "abc", window=(2, 2))

    def test_window_restricts_candidates(self):
        text = "alpha beta gamma alpha"
        full = interval_search(text, "alpha")
        tail = interval_search(text, "alpha", window=(8, len(text)))
        assert full.span_a[0] < tail.span_a[0]
        assert full.cer_value == tail.cer_value == 0.0

    def test_tie_break_prefers_earliest(self):
        result = interval_search("abab", "ab")
        assert result.span_a == (0, 2)

    @pytest.mark.parametrize("seed", range(30))
    def test_oracle_equivalence_random(self, seed):
        rng = random.Random(seed)
        text = random_text(rng, rng.randint(3, 22))
        hyp = random_text(rng, rng.randint(1, 8))
        if rng.random() < 0.5:
            pos = rng.randrange(max(1, len(text) - 10))
            hyp = text[pos : pos + rng.randint(3, 25)]
        expected = best_interval_cer(text, hyp, 0, len(text))
        if expected is None:
            with pytest.raises(EmptyWindow):
                interval_search(text, hyp)
            return
        got = interval_search(text, hyp)
        assert got.cer_value == expected
        got_unpruned = interval_search(text, hyp, prune=False)
        assert got_unpruned.cer_value == expected
        assert got_unpruned.span_a == got.span_a

    @pytest.mark.parametrize("seed", range(10))
    def test_max_cer_decision_exact(self, seed):
        rng = random.Random(seed + 100)
        text = random_text(rng, rng.randint(4, 18))
        hyp = random_text(rng, rng.randint(1, 6))
        expected = best_interval_cer(text, hyp, 0, len(text))
        if expected is None:
            return
        capped = interval_search(text, hyp, max_cer=0.2)
        if expected <= 0.2:
            assert capped.cer_value == expected
        else:
            assert capped.cer_value > 0.2

    def test_early_exit_returns_high(self):
        text = "one two three four five six seven"
        result = interval_search(text, "three four", early_exit=True)
        assert result.quality is MatchQuality.HIGH

    def test_early_exit_never_worse_quality_class(self):
        rng = random.Random(5)
        policy = ThresholdPolicy()
        for _ in range(40):
            text = random_text(rng, rng.randint(4, 20))
            pos = rng.randrange(max(1, len(text) - 8))
            hyp = text[pos : pos + rng.randint(4, 20)]
            expected = best_interval_cer(text, hyp, 0, len(text))
            if expected is None:
                continue
            eager = interval_search(text, hyp, early_exit=True)
            optimal_quality = policy.classify(expected)
            ranks = {MatchQuality.HIGH: 0, MatchQuality.MIDDLE: 1, MatchQuality.REJECT: 2}
            assert ranks[eager.quality] <= ranks[optimal_quality]


class TestGappedSearch:
    def test_bridges_a_gap(self):
        text = "hello brave new world"
        result = gapped_search(text, "hello world", max_gap=12)
        assert result.cer_value == 0.0
        assert result.search_type is SearchType.GAPPED
        assert result.span_b is not None
        (s, j), (k, i) = result.span_a, result.span_b
        assert s < j < k < i
        assert k - j <= 12
        assert cer_normalize(text[s:j] + text[k:i]) == "hello world"

    def test_gap_budget_respected(self):
        text = "hello brave new world"
        # the needed gap exceeds the budget, so the best constrained
        # candidate scores worse than the unconstrained one
        tight = gapped_search(text, "hello world", max_gap=2)
        loose = gapped_search(text, "hello world", max_gap=12)
        assert tight.cer_value > loose.cer_value
        (s, j), (k, i) = tight.span_a, tight.span_b
        assert 1 <= k - j <= 2

    def test_matches_raw_quadruple_oracle(self):
        rng = random.Random(11)
        for _ in range(25):
            text = random_text(rng, rng.randint(3, 8))
            hyp = random_text(rng, rng.randint(1, 5))
            max_gap = rng.choice([2, 5, 9, 60])
            expected = best_gapped_cer(text, hyp, 0, len(text), max_gap)
            if expected is None:
                with pytest.raises(EmptyWindow):
                    gapped_search(text, hyp, max_gap=max_gap)
                continue
            got = gapped_search(text, hyp, max_gap=max_gap)
            assert got.cer_value == expected, (text, hyp, max_gap)
            (s, j), (k, i) = got.span_a, got.span_b
            assert 0 <= s < j < k < i <= len(text)
            assert 1 <= k - j <= max_gap
            reported = cer_slow(text[s:j] + text[k:i], hyp)
            assert reported == expected

    def test_gapped_close_to_interval_on_contiguous_match(self):
        rng = random.Random(23)
        for _ in range(20):
            text = random_text(rng, rng.randint(4, 10), punct=False)
            pos = rng.randrange(max(1, len(text) - 12))
            hyp = text[pos : pos + rng.randint(6, 18)]
            hyp_n = cer_normalize(hyp)
            if len(hyp_n) < 2:
                continue
            interval = interval_search(text, hyp)
            try:
                gapped = gapped_search(text, hyp, max_gap=8)
            except EmptyWindow:
                continue
            assert gapped.cer_value >= interval.cer_value
            # Carving a one-char gap out of the interval-optimal span adds
            # at most two edits (the char plus a possible whitespace merge)
            # and shrinks the candidate by at most two characters.
            if len(hyp_n) > 2:
                bound = interval.cer_value + 2 / (len(hyp_n) - 2)
                assert gapped.cer_value <= bound + 1e-12

    def test_rejects_max_gap_below_one(self):
        with pytest.raises(ValueError):
            gapped_search("some text here", "text", max_gap=0)


class TestThresholdPolicy:
    def test_boundaries(self):
        import math

        policy = ThresholdPolicy()
        assert policy.classify(0.0) is MatchQuality.HIGH
        assert policy.classify(0.05) is MatchQuality.HIGH
        assert policy.classify(math.nextafter(0.05, 1)) is MatchQuality.MIDDLE
        assert policy.classify(0.2) is MatchQuality.MIDDLE
        assert policy.classify(math.nextafter(0.2, 1)) is MatchQuality.REJECT

    def test_invalid(self):
        with pytest.raises(ValueError):
            ThresholdPolicy(high=0.3, middle=0.2)


class TestWindowParams:
    def test_anchoring(self):
        params = WindowParams()
        lo, hi = params.around(cursor=100, hyp_len=50, text_len=1000)
        assert lo == 70
        assert hi == 100 + 80 + 120

    def test_clamped_to_text(self):
        params = WindowParams()
        lo, hi = params.around(cursor=5, hyp_len=10, text_len=40)
        assert lo == 0
        assert hi == 40

    def test_floor_respected(self):
        params = WindowParams()
        lo, _ = params.around(cursor=100, hyp_len=10, text_len=1000, floor=90)
        assert lo == 90
