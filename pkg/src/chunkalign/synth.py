"""Synthetic narrated corpora for tests, experiments and demos.

Builds a mono buffer of noise-burst "sentences" separated by silences,
the matching reference text, and a sample-accurate script mapping each
burst to its spoken words.  Scripted mock backends read that script, so
a corpus aligns perfectly under a faithful mock and degrades in
controlled ways when mismatch features or corruption are enabled.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

DEFAULT_RATE = 8000
SECONDS_PER_WORD = 0.42
SENTENCE_LEAD_S = 0.5
SILENCE_S = 0.75


@dataclass(frozen=True)
class SyntheticCorpus:
    """A narrated file: audio, reference text and the true script."""

    audio: AudioBuffer
    text: str
    script: list[tuple[int, int, str]]
    sentences: list[str]
    # sentence indices carrying each mismatch feature, when enabled
    censored_index: int | None = None
    censored_phrase: str | None = None
    repeated_index: int | None = None
    skipped_index: int | None = None
    title: str | None = None


def pseudo_word(rng: random.Random) -> str:
    syllables = rng.randint(1, 3)
    return "".join(
        rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(syllables)
    )


def pseudo_sentence(rng: random.Random, n_words: int) -> list[str]:
    return [pseudo_word(rng) for _ in range(n_words)]


def _burst(rng: np.random.Generator, seconds: float, rate: int) -> np.ndarray:
    return rng.uniform(-0.5, 0.5, int(seconds * rate))


def _silence(seconds: float, rate: int) -> np.ndarray:
    return np.zeros(int(seconds * rate))


def make_corpus(
    n_sentences: int,
    *,
    seed: int = 0,
    rate: int = DEFAULT_RATE,
    words_per_sentence: tuple[int, int] = (5, 9),
    spoken_only_title: bool = False,
    censor_phrase: bool = False,
    repeat_sentence: bool = False,
    skip_sentence: bool = False,
) -> SyntheticCorpus:
    """Build a corpus of ``n_sentences`` spoken sentences.

    Optional mismatch features follow the failure modes long recordings
    show in practice: a spoken title missing from the text, a phrase in
    the text the speaker censors, a sentence spoken twice (self
    correction), and a text sentence never spoken.
    """
    rng = random.Random(seed)
    noise = np.random.default_rng(seed + 1)
    sentences = [
        pseudo_sentence(rng, rng.randint(*words_per_sentence))
        for _ in range(n_sentences)
    ]
    censored_index = repeated_index = skipped_index = None
    if censor_phrase and n_sentences >= 3:
        censored_index = n_sentences // 3
    if repeat_sentence and n_sentences >= 3:
        repeated_index = (2 * n_sentences) // 3
    if skip_sentence and n_sentences >= 4:
        skipped_index = n_sentences // 2
        if skipped_index in (censored_index, repeated_index):
            skipped_index += 1

    text_sentences: list[str] = []
    censored_phrase = None
    spoken_plan: list[tuple[str, list[str]]] = []  # (sentence text form, spoken words)
    for idx, words in enumerate(sentences):
        spoken_words = list(words)
        text_words = list(words)
        if idx == censored_index:
            # Long enough that no contiguous span stays under the reject
            # threshold, short enough for the default gap budget.
            extra = pseudo_sentence(rng, 5)
            censored_phrase = " ".join(extra)
            cut = len(text_words) // 2
            text_words = text_words[:cut] + extra + text_words[cut:]
        sentence_text = " ".join(text_words).capitalize() + "."
        text_sentences.append(sentence_text)
        if idx == skipped_index:
            continue
        spoken_plan.append((sentence_text, spoken_words))
        if idx == repeated_index:
            spoken_plan.append((sentence_text, spoken_words))

    parts: list[np.ndarray] = []
    script: list[tuple[int, int, str]] = []
    cursor = 0
    title = None
    if spoken_only_title:
        title_words = pseudo_sentence(rng, 4)
        title = " ".join(title_words)
        span = _burst(noise, SENTENCE_LEAD_S + SECONDS_PER_WORD * len(title_words), rate)
        parts.append(span)
        script.append((cursor, cursor + len(span), title))
        cursor += len(span)
        gap = _silence(SILENCE_S, rate)
        parts.append(gap)
        cursor += len(gap)
    for _, spoken_words in spoken_plan:
        span = _burst(noise, SENTENCE_LEAD_S + SECONDS_PER_WORD * len(spoken_words), rate)
        parts.append(span)
        script.append((cursor, cursor + len(span), " ".join(spoken_words)))
        cursor += len(span)
        gap = _silence(SILENCE_S, rate)
        parts.append(gap)
        cursor += len(gap)
    audio = AudioBuffer(np.concatenate(parts[:-1]), rate)
    return SyntheticCorpus(
        audio=audio,
        text=" ".join(text_sentences),
        script=script,
        sentences=text_sentences,
        censored_index=censored_index,
        censored_phrase=censored_phrase,
        repeated_index=repeated_index,
        skipped_index=skipped_index,
        title=title,
    )
