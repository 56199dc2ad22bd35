"""Unit-cost Levenshtein distance and the character error rate."""

from __future__ import annotations

import numpy as np

from .textprep import cer_normalize

# Above this cell count the vectorized row recurrence beats plain loops.
_VECTOR_THRESHOLD = 4096


class EmptyReference(ValueError):
    """The reference string normalizes to nothing; CER is undefined."""


def str_codes(text: str) -> np.ndarray:
    """Code-point array view of a string (one int32 per character)."""
    return np.frombuffer(text.encode("utf-32-le"), dtype="<u4").astype(np.int32)


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) * len(b) >= _VECTOR_THRESHOLD:
        return int(prefix_distances(str_codes(a), str_codes(b))[-1])
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            cur.append(min(cur[-1] + 1, prev[j] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def prefix_distances(text_codes: np.ndarray, hyp_codes: np.ndarray) -> np.ndarray:
    """Distances from every prefix of ``text_codes`` to all of ``hyp_codes``.

    Returns a vector ``d`` with ``d[p] == levenshtein(text[:p], hyp)``.
    Row recurrence over hypothesis characters; the in-row dependency
    (text-character deletions) is resolved with a running prefix minimum,
    which keeps every step a fixed number of vector operations.
    """
    m = len(text_codes)
    offsets = np.arange(m + 1, dtype=np.int32)
    row = offsets.copy()
    stretch = np.empty(m + 1, dtype=np.int32)
    for q, code in enumerate(hyp_codes, 1):
        stretch[0] = q
        np.add(row[:-1], text_codes != code, out=stretch[1:])
        np.minimum(stretch[1:], row[1:] + 1, out=stretch[1:])
        np.subtract(stretch, offsets, out=stretch)
        np.minimum.accumulate(stretch, out=stretch)
        np.add(stretch, offsets, out=stretch)
        row, stretch = stretch, row
    return row


def cer(reference: str, hypothesis: str) -> float:
    """Character error rate of ``hypothesis`` against ``reference``.

    Both strings pass through ``cer_normalize`` first; the distance is then
    divided by the normalized reference length.
    """
    ref = cer_normalize(reference)
    hyp = cer_normalize(hypothesis)
    if not ref:
        raise EmptyReference("reference normalizes to an empty string")
    return levenshtein(ref, hyp) / len(ref)
