"""Sentence tokenization with POS-driven subdivision.

Punctuation splits text into sentences first.  Sentences over the
maximum token length are subdivided at verb boundaries: the split point
falls immediately after the verb's word group, carrying any adjacent
symbol tokens and a following conjunction with the verb, since those are
pronounced as one unit.  A word followed by Ezafe-tagged words forms one
group that no split may cut.  Fragments below the minimum length merge
into a neighbor, leftward first.

The POS tagger is an interface: a dictionary tagger (tests, simple
languages), a persistent subprocess speaking line-delimited JSON
({"tokens": [...]} -> {"tags": [...]}), or any callable object with the
same ``tag`` method.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

log = logging.getLogger(__name__)

TAG_VERB = "VERB"
TAG_EZAFE = "EZAFE"
TAG_OTHER = "OTHER"

SENTENCE_FINAL = ".!?؟۔…"
DEFAULT_CONJUNCTIONS = frozenset({"and", "va", "و"})


class TaggerFailure(Exception):
    """The POS tagger failed; carries the offending sentence."""


class LeadingEzafe(ValueError):
    """A sentence cannot begin with an Ezafe-tagged token."""


@dataclass(frozen=True)
class TaggedToken:
    surface: str
    tag: str
    index: int


@dataclass(frozen=True)
class WordGroup:
    tokens: tuple[TaggedToken, ...]

    @property
    def head_index(self) -> int:
        return self.tokens[0].index

    @property
    def end_index(self) -> int:
        return self.tokens[-1].index + 1

    @property
    def has_verb(self) -> bool:
        return any(t.tag == TAG_VERB for t in self.tokens)


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str]: ...


class DictionaryTagger:
    """Deterministic lookup tagger; punctuation is stripped for lookup."""

    def __init__(self, mapping: dict[str, str], default: str = TAG_OTHER):
        self._mapping = mapping
        self._default = default

    @classmethod
    def from_file(cls, path: str | Path) -> "DictionaryTagger":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def tag(self, tokens: Sequence[str]) -> list[str]:
        out = []
        for token in tokens:
            bare = token.strip("".join(c for c in token if not c.isalnum()))
            out.append(self._mapping.get(bare.lower(), self._default))
        return out


class SubprocessTagger:
    """Persistent tagger process, one JSON request/response pair per line."""

    def __init__(self, command: str, timeout_s: float = 60.0):
        self._command = shlex.split(command)
        self._timeout_s = timeout_s
        self._proc: subprocess.Popen | None = None

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

    def tag(self, tokens: Sequence[str]) -> list[str]:
        self._ensure_started()
        assert self._proc is not None
        try:
            self._proc.stdin.write(json.dumps({"tokens": list(tokens)}, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except OSError as exc:
            raise TaggerFailure(f"tagger process failed: {exc}") from exc
        if not line:
            raise TaggerFailure("tagger process exited")
        try:
            tags = json.loads(line)["tags"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise TaggerFailure(f"bad tagger response: {line!r}") from exc
        if len(tags) != len(tokens):
            raise TaggerFailure("tagger returned wrong tag count")
        return tags

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None


def group_ezafe(tokens: Sequence[TaggedToken]) -> list[WordGroup]:
    """Partition into head-plus-Ezafe-run groups."""
    if tokens and tokens[0].tag == TAG_EZAFE:
        raise LeadingEzafe(f"sentence starts with an Ezafe token: {tokens[0].surface!r}")
    groups: list[WordGroup] = []
    current: list[TaggedToken] = []
    for token in tokens:
        if token.tag == TAG_EZAFE:
            current.append(token)
        else:
            if current:
                groups.append(WordGroup(tuple(current)))
            current = [token]
    if current:
        groups.append(WordGroup(tuple(current)))
    return groups


def _is_symbol_token(token: str) -> bool:
    return not any(ch.isalnum() for ch in token)


def _split_points(
    tokens: list[str],
    tags: list[str],
    conjunctions: frozenset[str],
) -> list[int]:
    """Token indices where an over-length sentence may be cut."""
    tagged = [TaggedToken(s, t, i) for i, (s, t) in enumerate(zip(tokens, tags))]
    points = []
    for group in group_ezafe(tagged):
        if not group.has_verb:
            continue
        cut = group.end_index
        while cut < len(tokens) and _is_symbol_token(tokens[cut]):
            cut += 1
        if cut < len(tokens) and tokens[cut].strip(".,;!?").lower() in conjunctions:
            cut += 1
            while cut < len(tokens) and _is_symbol_token(tokens[cut]):
                cut += 1
        if 0 < cut < len(tokens):
            points.append(cut)
    return sorted(set(points))


def _subdivide(length: int, points: list[int], max_len: int) -> list[tuple[int, int]]:
    """Greedy split: always the last boundary keeping the piece in bounds."""
    pieces = []
    start = 0
    remaining = [p for p in points]
    while length - start > max_len:
        usable = [p for p in remaining if start < p <= start + max_len]
        if usable:
            cut = usable[-1]
        else:
            later = [p for p in remaining if p > start]
            if not later:
                break
            cut = later[0]
        pieces.append((start, cut))
        start = cut
    pieces.append((start, length))
    return pieces


def _merge_short(pieces: list[tuple[int, int]], min_len: int) -> list[tuple[int, int]]:
    merged = list(pieces)
    idx = 0
    while idx < len(merged):
        start, end = merged[idx]
        if end - start >= min_len or len(merged) == 1:
            idx += 1
            continue
        if idx > 0:
            prev = merged[idx - 1]
            merged[idx - 1] = (prev[0], end)
            del merged[idx]
            idx = max(idx - 1, 0)
        else:
            nxt = merged[idx + 1]
            merged[idx] = (start, nxt[1])
            del merged[idx + 1]
    return merged


def split_sentences(
    text: str,
    tagger: Tagger,
    min_len: int,
    max_len: int,
    conjunctions: frozenset[str] = DEFAULT_CONJUNCTIONS,
) -> list[str]:
    """Tokenize ``text`` into sentences within the token-length bounds.

    Punctuation-based sentences within ``max_len`` pass through; longer
    ones are subdivided at verb boundaries.  The concatenation of the
    output reproduces the input token sequence.  A sentence with no verb
    boundary is emitted whole and logged.
    """
    if not (0 < min_len < max_len):
        raise ValueError("need 0 < min_len < max_len")
    out: list[str] = []
    for sentence_tokens in _punctuation_sentences(text):
        if len(sentence_tokens) <= max_len:
            out.append(" ".join(sentence_tokens))
            continue
        try:
            tags = tagger.tag(sentence_tokens)
        except (TaggerFailure, LeadingEzafe):
            raise
        except Exception as exc:
            raise TaggerFailure(
                f"tagger failed on sentence: {' '.join(sentence_tokens)!r}"
            ) from exc
        points = _split_points(sentence_tokens, tags, conjunctions)
        pieces = _subdivide(len(sentence_tokens), points, max_len)
        pieces = _merge_short(pieces, min_len)
        for start, end in pieces:
            if end - start > max_len:
                log.warning(
                    "sentence piece of %d tokens exceeds max_len=%d (no usable verb boundary)",
                    end - start,
                    max_len,
                )
            out.append(" ".join(sentence_tokens[start:end]))
    return out


def _punctuation_sentences(text: str) -> list[list[str]]:
    sentences: list[list[str]] = []
    current: list[str] = []
    for token in text.split():
        current.append(token)
        if token and token[-1] in SENTENCE_FINAL:
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return sentences
