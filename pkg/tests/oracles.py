"""Independent reference implementations used to pin expected test values.

Everything here favors obviousness over speed: plain dynamic programming,
raw candidate enumeration, no pruning, no shared code with the search
paths under test (only the public ``cer_normalize`` semantics are reused,
which the distance suite verifies separately against these oracles).
"""

from __future__ import annotations

import numpy as np

from chunkalign.textprep import cer_normalize


def levenshtein_slow(a: str, b: str) -> int:
    """Textbook full-table unit-cost edit distance."""
    rows = len(a) + 1
    cols = len(b) + 1
    table = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        table[i][0] = i
    for j in range(cols):
        table[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[-1][-1]


def cer_slow(reference: str, hypothesis: str) -> float | None:
    """CER per definition; None when the reference normalizes to nothing."""
    ref = cer_normalize(reference)
    hyp = cer_normalize(hypothesis)
    if not ref:
        return None
    return levenshtein_slow(ref, hyp) / len(ref)


def prefix_row(text: str, hyp: str) -> np.ndarray:
    """Vector d with d[p] = edit distance between text[:p] and hyp.

    Fresh vectorized formulation (kept separate from the package's); it is
    itself validated against ``levenshtein_slow`` in the distance suite.
    """
    m = len(text)
    tcodes = np.array([ord(c) for c in text], dtype=np.int64)
    offs = np.arange(m + 1, dtype=np.int64)
    row = offs.copy()
    for q, ch in enumerate(hyp, 1):
        candidate = np.empty(m + 1, dtype=np.int64)
        candidate[0] = q
        candidate[1:] = np.minimum(row[:-1] + (tcodes != ord(ch)), row[1:] + 1)
        candidate = np.minimum.accumulate(candidate - offs) + offs
        row = candidate
    return row


def best_interval_cer(text: str, hyp: str, lo: int, hi: int) -> float | None:
    """Exhaustive minimum of cer(text[s:i], hyp) over lo <= s < i <= hi.

    Enumerates per start: the normalized forms of text[s:i] over all i are
    exactly the non-space-ending prefixes of cer_normalize(text[s:hi]).
    """
    hyp_n = cer_normalize(hyp)
    best: float | None = None
    for s in range(lo, hi):
        slice_n = cer_normalize(text[s:hi])
        if not slice_n:
            continue
        dists = prefix_row(slice_n, hyp_n)
        for p in range(1, len(slice_n) + 1):
            if slice_n[p - 1] == " ":
                continue
            value = dists[p] / p
            if best is None or value < best:
                best = value
    return best


def _two_row_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        append = cur.append
        last = i
        for j, cb in enumerate(b, 1):
            last = min(last + 1, prev[j] + 1, prev[j - 1] + (ca != cb))
            append(last)
        prev = cur
    return prev[-1]


def best_gapped_cer(
    text: str, hyp: str, lo: int, hi: int, max_gap: int
) -> float | None:
    """Exhaustive minimum over raw quadruples lo <= s < j < k < i <= hi.

    Candidates are text[s:j] + text[k:i] with 1 <= k - j <= max_gap; those
    normalizing to nothing are skipped (their CER is undefined).  Scores
    are memoized per normalized candidate, which only dedupes work.
    """
    hyp_n = cer_normalize(hyp)
    memo: dict[str, float | None] = {}
    best: float | None = None
    for j in range(lo + 1, hi - 1):
        for k in range(j + 1, min(j + max_gap, hi - 1) + 1):
            tail = text[k:hi]
            for s in range(lo, j):
                head = text[s:j]
                for span in range(1, len(tail) + 1):
                    cand_n = cer_normalize(head + tail[:span])
                    value = memo.get(cand_n, -1.0)
                    if value == -1.0:
                        value = (
                            _two_row_distance(cand_n, hyp_n) / len(cand_n)
                            if cand_n
                            else None
                        )
                        memo[cand_n] = value
                    if value is not None and (best is None or value < best):
                        best = value
    return best


def greedy_merge_durations(
    piece_bounds: list[tuple[int, int]], rate: int, min_s: float, max_s: float
) -> list[tuple[int, int]]:
    """Reference greedy merge of speech pieces into duration-bounded groups.

    Pieces are (start, end) sample intervals in order; merging a group
    spans from the first piece's start to the last piece's end.  A group
    grows while shorter than min_s; a trailing short group joins its left
    neighbor.
    """
    groups: list[tuple[int, int]] = []
    current: tuple[int, int] | None = None
    for start, end in piece_bounds:
        if current is None:
            current = (start, end)
        else:
            current = (current[0], end)
        if (current[1] - current[0]) / rate >= min_s:
            groups.append(current)
            current = None
    if current is not None:
        if groups and (current[1] - groups[-1][0]) / rate <= max_s * 1.05:
            groups[-1] = (groups[-1][0], current[1])
        else:
            groups.append(current)
    return groups
