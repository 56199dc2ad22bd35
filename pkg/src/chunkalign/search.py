"""Approximate substring search over reference text.

Hypothesis transcripts are matched against reference text by minimizing
CER over candidate spans.  Two searches exist:

* ``interval_search`` scans contiguous spans ``text[s:i]``.
* ``gapped_search`` scans two-piece spans ``text[s:j] + text[k:i]`` with
  a bounded gap, modeling a censored or skipped passage.

Both operate on a normalized *view* of the window (the ``cer_normalize``
form with an index map back to raw coordinates), so candidate scores are
exactly ``cer(raw_candidate, hyp)`` while the scan itself runs on clean
text.  The scans are batched: all candidate start positions advance
through the edit-distance recurrence together, one vectorized step per
hypothesis character.  Pruning (candidate-length caps from the running
best, block abandonment via row minima) never changes the returned CER;
optional early exit may return any HIGH candidate before the global
minimum is known.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distance import str_codes
from .textprep import _kept_chars, cer_normalize

_SPACE = ord(" ")
_PAD = -1
# Margin for float comparisons used only to *prune*; candidate values
# themselves are exact D/L divisions on both sides of every test oracle.
_PRUNE_EPS = 1e-9
_BLOCK_STARTS = 64
_PAIR_CHUNK_CELLS = 4_000_000


class EmptyWindow(ValueError):
    """The search window contains no scorable candidate."""


class SearchType(str, Enum):
    INTERVAL = "INTERVAL"
    GAPPED = "GAPPED"


class MatchQuality(str, Enum):
    HIGH = "HIGH"
    MIDDLE = "MIDDLE"
    REJECT = "REJECT"


@dataclass(frozen=True)
class ThresholdPolicy:
    """CER class boundaries: HIGH at or below ``high``, MIDDLE up to ``middle``."""

    high: float = 0.05
    middle: float = 0.2

    def __post_init__(self) -> None:
        if not (0 < self.high <= self.middle < 1):
            raise ValueError(f"bad thresholds: high={self.high} middle={self.middle}")

    def classify(self, value: float) -> MatchQuality:
        if value <= self.high:
            return MatchQuality.HIGH
        if value <= self.middle:
            return MatchQuality.MIDDLE
        return MatchQuality.REJECT


@dataclass(frozen=True)
class WindowParams:
    """Cursor-anchored search window geometry, in characters."""

    slack_back: int = 30
    scale: float = 1.6
    slack_fwd: int = 120

    def around(self, cursor: int, hyp_len: int, text_len: int, floor: int = 0) -> tuple[int, int]:
        lo = max(floor, min(cursor - self.slack_back, text_len))
        hi = min(text_len, cursor + int(self.scale * hyp_len) + self.slack_fwd)
        return max(0, lo), max(hi, min(lo + 1, text_len))


@dataclass(frozen=True)
class MatchResult:
    """Best span found for one hypothesis.

    ``span_a`` is a half-open character interval into the original text;
    gapped results carry the second piece in ``span_b``.  ``cer_value``
    is exact for full searches and an upper bound once ``early_exit``
    fired or ``max_cer`` capped the scan above the returned value.
    """

    span_a: tuple[int, int]
    span_b: tuple[int, int] | None
    cer_value: float
    search_type: SearchType
    quality: MatchQuality

    @property
    def text_end(self) -> int:
        return self.span_b[1] if self.span_b is not None else self.span_a[1]

    @property
    def text_start(self) -> int:
        return self.span_a[0]

    def extract(self, text: str) -> str:
        if self.span_b is None:
            return text[self.span_a[0] : self.span_a[1]]
        return text[self.span_a[0] : self.span_a[1]] + text[self.span_b[0] : self.span_b[1]]


@dataclass(frozen=True)
class NormalizedView:
    """cer_normalize form of a window plus per-character raw index maps."""

    text: str
    starts: np.ndarray  # raw index of each normalized character's source
    ends: np.ndarray  # raw index one past that source
    lo: int
    hi: int


def build_view(text: str, lo: int, hi: int) -> NormalizedView:
    chars: list[str] = []
    starts: list[int] = []
    ends: list[int] = []
    ws_first = -1
    ws_last = -1
    for idx in range(lo, hi):
        ch = text[idx]
        if ch.isspace():
            if ws_first < 0:
                ws_first = idx
            ws_last = idx
            continue
        mapped = _kept_chars(ch)
        if not mapped:
            continue
        if ws_first >= 0 and chars:
            chars.append(" ")
            starts.append(ws_first)
            ends.append(ws_last + 1)
        ws_first = -1
        for out in mapped:
            chars.append(out)
            starts.append(idx)
            ends.append(idx + 1)
    return NormalizedView(
        "".join(chars),
        np.asarray(starts, dtype=np.int64),
        np.asarray(ends, dtype=np.int64),
        lo,
        hi,
    )


def _clamp_window(window: tuple[int, int] | None, text_len: int) -> tuple[int, int]:
    if window is None:
        return 0, text_len
    lo, hi = window
    lo = max(0, min(int(lo), text_len))
    hi = max(lo, min(int(hi), text_len))
    return lo, hi


def _gather_block(codes: np.ndarray, starts: np.ndarray, width: int) -> np.ndarray:
    """Stack ``width`` characters after each start, padded with a no-match code."""
    m = len(codes)
    idx = starts[:, None] + np.arange(width)[None, :]
    out = np.where(idx < m, codes[np.minimum(idx, m - 1)], _PAD)
    return out.astype(np.int32)


def _advance(row: np.ndarray, block: np.ndarray, code: int, q: int, offsets: np.ndarray) -> np.ndarray:
    """One hypothesis character step for a batch of per-start DP rows."""
    nxt = np.empty_like(row)
    nxt[:, 0] = q
    np.add(row[:, :-1], block != code, out=nxt[:, 1:])
    np.minimum(nxt[:, 1:], row[:, 1:] + 1, out=nxt[:, 1:])
    np.subtract(nxt, offsets, out=nxt)
    np.minimum.accumulate(nxt, axis=1, out=nxt)
    np.add(nxt, offsets, out=nxt)
    return nxt


def _length_cap(n: int, bound: float, available: int) -> int:
    if bound >= 1.0 or not np.isfinite(bound):
        return available
    cap = int(np.floor(n / (1.0 - bound) + _PRUNE_EPS)) + 1
    return max(1, min(available, cap))


@dataclass
class _Best:
    value: float = np.inf
    key: tuple = ()
    payload: tuple | None = None

    def offer(self, value: float, key: tuple, payload: tuple) -> bool:
        if value < self.value or (value == self.value and (not self.key or key < self.key)):
            self.value = value
            self.key = key
            self.payload = payload
            return True
        return False


def interval_search(
    text: str,
    hyp: str,
    window: tuple[int, int] | None = None,
    *,
    policy: ThresholdPolicy | None = None,
    max_cer: float | None = None,
    early_exit: bool = False,
    prune: bool = True,
) -> MatchResult:
    """Minimum-CER contiguous span for ``hyp`` within ``window``.

    Exact global minimum by default; ties resolve to the smallest start,
    then the smallest end.  ``early_exit`` returns as soon as any HIGH
    candidate is seen.  ``max_cer`` bounds the scan: the accept/reject
    decision against it stays exact, but a result above it is only the
    best candidate the capped scan evaluated.  ``prune=False`` disables
    the length cap and block abandonment (for equivalence testing).
    """
    policy = policy or ThresholdPolicy()
    lo, hi = _clamp_window(window, len(text))
    view = build_view(text, lo, hi)
    m = len(view.text)
    if m == 0:
        raise EmptyWindow(f"window [{lo}, {hi}) holds no comparable text")
    hyp_n = cer_normalize(hyp)
    n = len(hyp_n)
    codes = str_codes(view.text)
    hcodes = str_codes(hyp_n)
    end_ok = codes != _SPACE
    start_positions = np.flatnonzero(end_ok)

    best = _Best()
    bound = max_cer if (prune and max_cer is not None) else np.inf

    for base in range(0, len(start_positions), _BLOCK_STARTS):
        starts = start_positions[base : base + _BLOCK_STARTS]
        avail = int(m - starts.min())
        width = _length_cap(n, bound, avail) if prune else avail
        block = _gather_block(codes, starts, width)
        offsets = np.arange(width + 1, dtype=np.int32)
        row = np.broadcast_to(offsets, (len(starts), width + 1)).copy()
        abandoned = False
        for q, code in enumerate(hcodes, 1):
            row = _advance(row, block, int(code), q, offsets)
            if prune and best.payload is not None and q % 8 == 0:
                if row.min() / width > bound + _PRUNE_EPS:
                    abandoned = True
                    break
        if abandoned:
            continue
        lengths = offsets[None, 1:]
        valid = (starts[:, None] + lengths <= m) & (block != _SPACE) & (block != _PAD)
        with np.errstate(divide="ignore"):
            scores = np.where(valid, row[:, 1:] / lengths, np.inf)
        block_min = scores.min()
        if not np.isfinite(block_min):
            continue
        if early_exit and block_min <= policy.high:
            hits = np.argwhere(scores <= policy.high)
            order = np.lexsort((hits[:, 1], hits[:, 0], np.abs(hits[:, 1] + 1 - n)))
            r, c = hits[order[0]]
            s_norm = int(starts[r])
            return _interval_result(view, text, s_norm, int(c + 1), float(scores[r, c]), policy)
        if block_min <= best.value:
            rows, cols = np.nonzero(scores == block_min)
            r, c = int(rows[0]), int(cols[0])
            s_norm = int(starts[r])
            span = (int(view.starts[s_norm]), int(view.ends[s_norm + c]))
            best.offer(float(block_min), span, (s_norm, c + 1))
        if prune:
            bound = min(bound, best.value)
    if best.payload is None:
        raise EmptyWindow(f"window [{lo}, {hi}) holds no comparable text")
    s_norm, length = best.payload
    return _interval_result(view, text, s_norm, length, best.value, policy)


def _interval_result(
    view: NormalizedView,
    text: str,
    s_norm: int,
    length: int,
    value: float,
    policy: ThresholdPolicy,
) -> MatchResult:
    span = (int(view.starts[s_norm]), int(view.ends[s_norm + length - 1]))
    return MatchResult(span, None, value, SearchType.INTERVAL, policy.classify(value))


# ---------------------------------------------------------------------------
# Gapped search
# ---------------------------------------------------------------------------
#
# A gapped candidate is text[s:j] + text[k:i] with s < j < k < i and
# k - j <= max_gap, scored as cer of the concatenation.  In normalized
# space that concatenation is piece1 + sep + piece2, where the pieces are
# space-free-edged spans of the view and sep is one space exactly when
# the raw spans take in whitespace at the seam.  Raw span edges can slide
# over dropped characters without changing the normalized pieces, so each
# normalized piece carries the raw index ranges its edges may occupy;
# feasibility of a pair (gap of 1..max_gap raw characters, with or
# without seam whitespace) is decided on those ranges.  Pieces whose raw
# span normalizes to nothing reduce the candidate to the other piece
# alone; those degenerate forms are enumerated separately.


@dataclass
class _PieceTails:
    """Raw j-ranges for piece-1 ends (and mirrored k-ranges for piece-2 starts)."""

    plain_lo: np.ndarray
    plain_hi: np.ndarray
    ws_lo: np.ndarray
    ws_hi: np.ndarray


def _forward_tails(text: str, view: NormalizedView) -> _PieceTails:
    """For each normalized end position e, the allowed raw j ranges.

    ``plain`` keeps the seam free of whitespace (j may cover trailing
    symbols only); ``ws`` requires at least one whitespace character
    (possible only when whitespace precedes the next kept character).
    """
    m = len(view.text)
    plain_lo = np.full(m + 1, 1, dtype=np.int64)
    plain_hi = np.full(m + 1, 0, dtype=np.int64)
    ws_lo = np.full(m + 1, 1, dtype=np.int64)
    ws_hi = np.full(m + 1, 0, dtype=np.int64)
    for e in range(1, m + 1):
        if view.text[e - 1] == " ":
            continue
        tight = int(view.ends[e - 1])
        pos = tight
        first_ws = -1
        while pos < view.hi:
            ch = text[pos]
            if _kept_chars(ch) not in ("", " "):
                break
            if ch.isspace() and first_ws < 0:
                first_ws = pos
            pos += 1
        next_kept = pos
        plain_lo[e] = tight
        plain_hi[e] = first_ws if first_ws >= 0 else next_kept
        if first_ws >= 0:
            ws_lo[e] = first_ws + 1
            ws_hi[e] = next_kept
    return _PieceTails(plain_lo, plain_hi, ws_lo, ws_hi)


def _backward_tails(text: str, view: NormalizedView) -> _PieceTails:
    """For each normalized start position b, the allowed raw k ranges."""
    m = len(view.text)
    plain_lo = np.full(m, 1, dtype=np.int64)
    plain_hi = np.full(m, 0, dtype=np.int64)
    ws_lo = np.full(m, 1, dtype=np.int64)
    ws_hi = np.full(m, 0, dtype=np.int64)
    for b in range(m):
        if view.text[b] == " ":
            continue
        tight = int(view.starts[b])
        pos = tight - 1
        last_ws = -1
        while pos >= view.lo:
            ch = text[pos]
            if _kept_chars(ch) not in ("", " "):
                break
            if ch.isspace() and last_ws < 0:
                last_ws = pos
            pos -= 1
        prev_kept_end = pos + 1
        plain_lo[b] = last_ws + 1 if last_ws >= 0 else prev_kept_end
        plain_hi[b] = tight
        if last_ws >= 0:
            ws_lo[b] = prev_kept_end
            ws_hi[b] = last_ws
    return _PieceTails(plain_lo, plain_hi, ws_lo, ws_hi)


def _all_tables(
    codes: np.ndarray, hcodes: np.ndarray, starts: np.ndarray, width: int
) -> np.ndarray:
    """Full per-start DP tensor: [q, start, length] -> edit distance."""
    block = _gather_block(codes, starts, width)
    offsets = np.arange(width + 1, dtype=np.int32)
    row = np.broadcast_to(offsets, (len(starts), width + 1)).copy()
    out = np.empty((len(hcodes) + 1, len(starts), width + 1), dtype=np.int32)
    out[0] = row
    for q, code in enumerate(hcodes, 1):
        row = _advance(row, block, int(code), q, offsets)
        out[q] = row
    return out


def _feasible(
    jl: np.ndarray, jh: np.ndarray, kl: np.ndarray, kh: np.ndarray, max_gap: int
) -> np.ndarray:
    """Pairwise test: some j in [jl,jh], k in [kl,kh] with 0 < k-j <= max_gap."""
    return (jl[:, None] < kh[None, :]) & (kl[None, :] - jh[:, None] <= max_gap)


def _min_plus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(min,+) product of piece tables sharing the hypothesis-split axis."""
    out = np.full((a.shape[0], b.shape[0]), np.iinfo(np.int32).max // 2, dtype=np.int32)
    for q in range(a.shape[1]):
        np.minimum(out, a[:, q][:, None] + b[:, q][None, :], out=out)
    return out


def _pick_raw_pair(
    jl: int, jh: int, kl: int, kh: int, max_gap: int
) -> tuple[int, int]:
    """Smallest (j, k) with j in [jl,jh], k in [kl,kh], 0 < k-j <= max_gap."""
    for j in range(jl, jh + 1):
        k_lo = max(kl, j + 1)
        if k_lo <= kh and k_lo - j <= max_gap:
            return j, k_lo
    raise AssertionError("pair marked feasible but no raw (j, k) found")


def gapped_search(
    text: str,
    hyp: str,
    window: tuple[int, int] | None = None,
    max_gap: int = 60,
    *,
    policy: ThresholdPolicy | None = None,
    max_cer: float | None = None,
    early_exit: bool = False,
    prune: bool = True,
) -> MatchResult:
    """Minimum-CER two-piece span with a bounded raw-character gap.

    Ties resolve to the smallest start, then the smallest combined
    normalized length, then the smallest gap edges.  ``max_cer``,
    ``early_exit`` and ``prune`` behave as in ``interval_search``.
    """
    policy = policy or ThresholdPolicy()
    if max_gap < 1:
        raise ValueError("max_gap must be at least 1")
    lo, hi = _clamp_window(window, len(text))
    view = build_view(text, lo, hi)
    m = len(view.text)
    if m == 0:
        raise EmptyWindow(f"window [{lo}, {hi}) holds no comparable text")
    hyp_n = cer_normalize(hyp)
    n = len(hyp_n)
    codes = str_codes(view.text)
    hcodes = str_codes(hyp_n)
    non_space = codes != _SPACE
    fwd_starts = np.flatnonzero(non_space)
    if fwd_starts.size == 0:
        raise EmptyWindow(f"window [{lo}, {hi}) holds no comparable text")

    bound = max_cer if (prune and max_cer is not None) else np.inf
    cap = _length_cap(n, bound, m) if prune else m

    # Forward tables cover piece 1 (prefix of the hypothesis); backward
    # tables, computed on reversed strings, cover piece 2.
    fwd = _all_tables(codes, hcodes, fwd_starts, min(cap, int(m - fwd_starts.min())))
    rcodes = codes[::-1].copy()
    rhcodes = hcodes[::-1].copy()
    rev_starts = np.flatnonzero(rcodes != _SPACE)
    bwd = _all_tables(rcodes, rhcodes, rev_starts, min(cap, int(m - rev_starts.min())))

    tails = _forward_tails(text, view)
    heads = _backward_tails(text, view)

    p1 = _piece1_arrays(view, fwd, fwd_starts, tails, cap)
    p2 = _piece2_arrays(view, bwd, rev_starts, heads, cap, m, n)
    if p1 is None or p2 is None:
        raise EmptyWindow(f"window [{lo}, {hi}) holds no gapped candidate")

    best = _Best()
    _scan_degenerate(text, view, p1, p2, max_gap, best)
    if not (early_exit and best.payload is not None and best.value <= policy.high):
        _scan_pairs(p1, p2, max_gap, n, best, bound, policy, early_exit, prune)
    if best.payload is None:
        raise EmptyWindow(f"window [{lo}, {hi}) holds no gapped candidate")
    kind, data = best.payload
    span_a, span_b = _realize_spans(kind, data, max_gap)
    value = best.value
    return MatchResult(span_a, span_b, value, SearchType.GAPPED, policy.classify(value))


@dataclass
class _Pieces:
    norm_edge: np.ndarray  # piece1: normalized end; piece2: normalized start
    length: np.ndarray
    tight_a: np.ndarray  # raw tight start (piece1) / raw tight k (piece2)
    tight_b: np.ndarray  # raw tight end j (piece1) / raw tight i (piece2)
    cols_plain: np.ndarray  # [piece, q] distance columns, q = hyp split point
    cols_ws: np.ndarray  # with the seam space folded in (huge where absent)
    r_plain_lo: np.ndarray
    r_plain_hi: np.ndarray
    r_ws_lo: np.ndarray
    r_ws_hi: np.ndarray
    full_dist: np.ndarray  # dist(piece, whole hypothesis)


_HUGE = np.iinfo(np.int32).max // 4


def _piece1_arrays(
    view: NormalizedView,
    fwd: np.ndarray,
    fwd_starts: np.ndarray,
    tails: _PieceTails,
    cap: int,
) -> _Pieces | None:
    m = len(view.text)
    width = fwd.shape[2] - 1
    rows, lens = np.nonzero(
        (fwd_starts[:, None] + np.arange(1, width + 1)[None, :] <= m)
        & (np.arange(1, width + 1)[None, :] <= cap)
    )
    lens = lens + 1
    ends = fwd_starts[rows] + lens
    keep = np.array([view.text[e - 1] != " " for e in ends])
    rows, lens, ends = rows[keep], lens[keep], ends[keep]
    if rows.size == 0:
        return None
    cols_plain = fwd[:, rows, lens].T.copy()  # [piece, q]
    has_ws_col = np.array(
        [e < m and view.text[e] == " " and lens_i + 1 <= width for e, lens_i in zip(ends, lens)]
    )
    cols_ws = np.full_like(cols_plain, _HUGE)
    if has_ws_col.any():
        cols_ws[has_ws_col] = fwd[:, rows[has_ws_col], lens[has_ws_col] + 1].T
    starts_norm = fwd_starts[rows]
    return _Pieces(
        norm_edge=ends,
        length=lens,
        tight_a=view.starts[starts_norm],
        tight_b=view.ends[ends - 1],
        cols_plain=cols_plain,
        cols_ws=cols_ws,
        r_plain_lo=tails.plain_lo[ends],
        r_plain_hi=tails.plain_hi[ends],
        r_ws_lo=tails.ws_lo[ends],
        r_ws_hi=tails.ws_hi[ends],
        full_dist=cols_plain[:, -1].copy(),  # dist(piece1, h[:n]) == dist vs whole
    )


def _piece2_arrays(
    view: NormalizedView,
    bwd: np.ndarray,
    rev_starts: np.ndarray,
    heads: _PieceTails,
    cap: int,
    m: int,
    n: int,
) -> _Pieces | None:
    width = bwd.shape[2] - 1
    rows, lens = np.nonzero(
        (rev_starts[:, None] + np.arange(1, width + 1)[None, :] <= m)
        & (np.arange(1, width + 1)[None, :] <= cap)
    )
    lens = lens + 1
    # Reversed-space start r maps to normalized end position m - r; a piece
    # of length l2 then starts at normalized position m - r - l2.
    norm_end = m - rev_starts[rows]
    norm_start = norm_end - lens
    keep = np.array([view.text[b] != " " for b in norm_start])
    rows, lens, norm_start = rows[keep], lens[keep], norm_start[keep]
    if rows.size == 0:
        return None
    # bwd[qr, row, l2] = dist(piece2, h[n - qr:]); align on q = n - qr.
    aligned = bwd[::-1, rows, lens].T.copy()  # [piece, q]
    has_ws_col = np.array(
        [b > 0 and view.text[b - 1] == " " and l + 1 <= width for b, l in zip(norm_start, lens)]
    )
    cols_ws = np.full_like(aligned, _HUGE)
    if has_ws_col.any():
        cols_ws[has_ws_col] = bwd[::-1, rows[has_ws_col], lens[has_ws_col] + 1].T
    return _Pieces(
        norm_edge=norm_start,
        length=lens,
        tight_a=view.starts[norm_start],
        tight_b=view.ends[norm_start + lens - 1],
        cols_plain=aligned,
        cols_ws=cols_ws,
        r_plain_lo=heads.plain_lo[norm_start],
        r_plain_hi=heads.plain_hi[norm_start],
        r_ws_lo=heads.ws_lo[norm_start],
        r_ws_hi=heads.ws_hi[norm_start],
        full_dist=aligned[:, 0].copy(),  # dist(piece2, h[0:])
    )


def _junk_positions(text: str, lo: int, hi: int) -> np.ndarray:
    return np.asarray([i for i in range(lo, hi) if not text[i].isalnum()], dtype=np.int64)


def _scan_degenerate(
    text: str,
    view: NormalizedView,
    p1: _Pieces,
    p2: _Pieces,
    max_gap: int,
    best: _Best,
) -> None:
    """Candidates where one raw piece normalizes to nothing.

    Such a candidate scores exactly like the surviving piece alone, so
    the spans just need a feasible all-junk counterpart within the gap
    budget.
    """
    junk = _junk_positions(text, view.lo, view.hi)
    if junk.size == 0:
        return

    # Piece 2 alone: an all-junk piece 1 must fit before it, so some
    # non-alnum character x needs s = x, j = x + 1 < k <= x + 1 + max_gap.
    has_ws = p2.r_ws_hi >= p2.r_ws_lo
    k_lo = np.where(has_ws, np.minimum(p2.r_plain_lo, p2.r_ws_lo), p2.r_plain_lo)
    k_hi = p2.r_plain_hi
    x_lo = np.maximum(view.lo, k_lo - max_gap - 1)
    x_hi = k_hi - 2
    pos = np.searchsorted(junk, x_lo, side="left")
    ok = (pos < len(junk)) & (junk[np.minimum(pos, len(junk) - 1)] <= x_hi)
    if ok.any():
        values = p2.full_dist / p2.length
        vmin = values[ok].min()
        for idx in np.flatnonzero(ok & (values == vmin)):
            x = int(junk[pos[idx]])
            k = int(max(k_lo[idx], x + 2))
            key = (x, int(p2.length[idx]), x + 1, k)
            best.offer(float(vmin), key, ("deg", (x, x + 1, k, int(p2.tight_b[idx]))))

    # Piece 1 alone: an all-junk piece 2 must fit after it.
    j_lo = p1.r_plain_lo
    j_hi = np.maximum(p1.r_plain_hi, p1.r_ws_hi)
    x_lo = j_lo + 1
    x_hi = np.minimum(view.hi - 1, j_hi + max_gap)
    pos = np.searchsorted(junk, x_lo, side="left")
    ok = (pos < len(junk)) & (junk[np.minimum(pos, len(junk) - 1)] <= x_hi)
    if ok.any():
        values = p1.full_dist / p1.length
        vmin = values[ok].min()
        for idx in np.flatnonzero(ok & (values == vmin)):
            x = int(junk[pos[idx]])
            j = int(max(j_lo[idx], x - max_gap))
            key = (int(p1.tight_a[idx]), int(p1.length[idx]), j, x)
            best.offer(float(vmin), key, ("deg", (int(p1.tight_a[idx]), j, x, x + 1)))


def _scan_pairs(
    p1: _Pieces,
    p2: _Pieces,
    max_gap: int,
    n: int,
    best: _Best,
    bound: float,
    policy: ThresholdPolicy,
    early_exit: bool,
    prune: bool,
) -> None:
    n1 = len(p1.norm_edge)
    n2 = len(p2.norm_edge)
    if n1 == 0 or n2 == 0:
        return
    keep1 = np.arange(n1)
    keep2 = np.arange(n2)
    banded = prune and np.isfinite(bound)
    if banded:
        # Sound joint filter: any pair's CER is at least
        # (min_q dist1 + min over pieces of min_q dist2) / L_max.
        min1 = p1.cols_plain.min(axis=1)
        min2 = p2.cols_plain.min(axis=1)
        lmax = n / (1.0 - bound) if bound < 1 else float(
            p1.length.max() + p2.length.max() + 1
        )
        budget = (bound + _PRUNE_EPS) * lmax
        keep1 = np.flatnonzero(min1 + int(min2.min()) <= budget)
        keep2 = np.flatnonzero(min2 + int(min1.min()) <= budget)
        if keep1.size == 0 or keep2.size == 0:
            return
        # Combined-length band: L < n/(1+bound) or L > n/(1-bound) cannot
        # reach the bound, so each piece-1 length admits only a length
        # slice of piece 2.  Above the cutoff the result is best-effort,
        # so dropped ties there are acceptable.
        len_lo = n / (1.0 + bound) - _PRUNE_EPS
        len_hi = (n / (1.0 - bound) + _PRUNE_EPS) if bound < 1 else np.inf
    else:
        len_lo, len_hi = -np.inf, np.inf
    # Length-major order groups piece-1 rows sharing one piece-2 slice.
    order1 = keep1[np.lexsort((p1.tight_a[keep1], p1.length[keep1]))]
    order2 = keep2[np.lexsort((p2.tight_a[keep2], p2.length[keep2]))]
    len2 = p2.length[order2]
    for sel, sub2 in _pair_chunks(p1.length, order1, order2, len2, banded, len_lo, len_hi):
        feas0 = _feasible(
            p1.r_plain_lo[sel], p1.r_plain_hi[sel], p2.r_plain_lo[sub2], p2.r_plain_hi[sub2], max_gap
        )
        feas1 = (
            _feasible(p1.r_ws_lo[sel], p1.r_ws_hi[sel], p2.r_plain_lo[sub2], p2.r_plain_hi[sub2], max_gap)
            | _feasible(p1.r_plain_lo[sel], p1.r_plain_hi[sel], p2.r_ws_lo[sub2], p2.r_ws_hi[sub2], max_gap)
            | _feasible(p1.r_ws_lo[sel], p1.r_ws_hi[sel], p2.r_ws_lo[sub2], p2.r_ws_hi[sub2], max_gap)
        )
        norm_ok = p1.norm_edge[sel][:, None] <= p2.norm_edge[sub2][None, :]
        feas0 &= norm_ok
        feas1 &= norm_ok
        if not (feas0.any() or feas1.any()):
            continue
        # Split points far from the piece lengths cannot belong to a pair
        # within the bound (dist1 >= |l1 - q|, dist2 >= |l2 - (n - q)|),
        # so the (min,+) product only needs a band of the q axis.  A pair
        # whose optimum lies outside the band exceeds the bound, keeping
        # at-or-below-bound results exact.
        q_slice = slice(0, n + 1)
        if banded:
            slack = (bound + _PRUNE_EPS) * (min(len_hi, p1.length.max() + p2.length.max() + 1)) + 1
            l1 = int(p1.length[sel[0]])
            l2_lo = int(p2.length[sub2].min())
            l2_hi = int(p2.length[sub2].max())
            q_lo = max(0, int(np.floor(max(l1 - slack, n - l2_hi - slack))))
            q_hi = min(n, int(np.ceil(min(l1 + slack, n - l2_lo + slack))))
            if q_lo > q_hi:
                continue
            q_slice = slice(q_lo, q_hi + 1)
        lengths = p1.length[sel][:, None] + p2.length[sub2][None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            d_plain = _min_plus(p1.cols_plain[sel][:, q_slice], p2.cols_plain[sub2][:, q_slice])
            c_plain = np.where(feas0, d_plain / lengths, np.inf)
            d_ws = np.minimum(
                _min_plus(p1.cols_ws[sel][:, q_slice], p2.cols_plain[sub2][:, q_slice]),
                _min_plus(p1.cols_plain[sel][:, q_slice], p2.cols_ws[sub2][:, q_slice]),
            )
            c_ws = np.where(feas1 & (d_ws < _HUGE), d_ws / (lengths + 1), np.inf)
        for scores, sep in ((c_plain, 0), (c_ws, 1)):
            local_min = scores.min()
            if not np.isfinite(local_min) or local_min > best.value:
                continue
            rows, cols = np.nonzero(scores == local_min)
            i1s = sel[rows]
            i2s = sub2[cols]
            keys = np.stack(
                [
                    p1.tight_a[i1s],
                    p1.length[i1s] + p2.length[i2s] + sep,
                    p1.tight_b[i1s],
                    p2.tight_a[i2s],
                ]
            )
            pick = np.lexsort(keys[::-1])[0]
            i1, i2 = int(i1s[pick]), int(i2s[pick])
            key = tuple(int(v) for v in keys[:, pick])
            best.offer(float(local_min), key, ("pair", (p1, p2, i1, i2, sep)))
        if early_exit and best.payload is not None and best.value <= policy.high:
            return


def _pair_chunks(lengths1, order1, order2, len2_sorted, banded, len_lo, len_hi):
    """Yield (piece-1 rows, compatible piece-2 rows) work units."""
    base = 0
    while base < order1.size:
        l1 = int(lengths1[order1[base]])
        stop = base
        while stop < order1.size and lengths1[order1[stop]] == l1:
            stop += 1
        if banded:
            lo2 = max(1, int(np.ceil(len_lo - l1 - 1)))
            hi2 = int(np.floor(len_hi - l1)) if np.isfinite(len_hi) else None
            a = int(np.searchsorted(len2_sorted, lo2, side="left"))
            b = int(np.searchsorted(len2_sorted, hi2, side="right")) if hi2 is not None else len2_sorted.size
        else:
            a, b = 0, len2_sorted.size
        sub2 = order2[a:b]
        if sub2.size == 0:
            base = stop
            continue
        step = max(1, _PAIR_CHUNK_CELLS // sub2.size)
        for inner in range(base, stop, step):
            yield order1[inner : inner + step], sub2
        base = stop


def _realize_spans(kind: str, data: tuple, max_gap: int) -> tuple[tuple[int, int], tuple[int, int]]:
    if kind == "deg":
        s, j, k, i = data
        return (int(s), int(j)), (int(k), int(i))
    p1, p2, i1, i2, sep = data
    if sep == 0:
        ranges = [
            (p1.r_plain_lo[i1], p1.r_plain_hi[i1], p2.r_plain_lo[i2], p2.r_plain_hi[i2])
        ]
    else:
        ranges = [
            (p1.r_ws_lo[i1], p1.r_ws_hi[i1], p2.r_plain_lo[i2], p2.r_plain_hi[i2]),
            (p1.r_plain_lo[i1], p1.r_plain_hi[i1], p2.r_ws_lo[i2], p2.r_ws_hi[i2]),
            (p1.r_ws_lo[i1], p1.r_ws_hi[i1], p2.r_ws_lo[i2], p2.r_ws_hi[i2]),
        ]
    for jl, jh, kl, kh in ranges:
        jl, jh, kl, kh = int(jl), int(jh), int(kl), int(kh)
        if jl < kh and kl - jh <= max_gap and jl <= jh and kl <= kh:
            j, k = _pick_raw_pair(jl, jh, kl, kh, max_gap)
            return (int(p1.tight_a[i1]), j), (k, int(p2.tight_b[i2]))
    raise AssertionError("winning pair has no feasible raw spans")
