"""Reference-text cleaning chains.

Two tiers of cleanup live here.  The heavy chain (``normalize`` ->
``remove_references`` -> ``verbalize_numbers`` ->
``clean_symbols_and_whitespace``) is applied once per reference file
before alignment.  The light ``cer_normalize`` strips case, punctuation
and whitespace noise so that character error rates compare spoken
content only; every CER in this package is computed on that normalized
form.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

log = logging.getLogger(__name__)

Verbalizer = Callable[[str], str]

_BRACKET_REF_RE = re.compile(r"\[\s*\d+\s*\]")
_URL_RE = re.compile(r"(?:https?://|ftp://|www\.)\S+", re.IGNORECASE)
_DIGIT_RUN_RE = re.compile(r"\d+")

DEFAULT_REFERENCE_MARKERS: tuple[re.Pattern[str], ...] = (
    re.compile(r"^\s*(references|sources|bibliography|further reading)\b[:.]?\s*$", re.IGNORECASE),
)

# Reference blocks are only recognized in the tail of a document.
REFERENCE_TAIL_FRACTION = 0.8

DEFAULT_WHITELIST = frozenset(
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "0123456789"
    " .,!?;:'\"-"
)


class VerbalizerFailure(Exception):
    """Raised by a verbalizer hook for a numeral token it cannot express."""


@dataclass(frozen=True)
class RuleSet:
    """Language-specific cleanup configuration.

    ``normalization_map`` holds ordered (variant, canonical) substitution
    pairs applied left-to-right, longest source first.  To keep
    ``normalize`` idempotent, no replacement string may contain any rule
    source; this is checked at construction.  ``protected_tokens`` survive
    ``clean_symbols_and_whitespace`` verbatim, and ``symbol_whitelist``
    lists the characters that step retains (it must cover the working
    language's alphabet plus the space character).
    """

    normalization_map: tuple[tuple[str, str], ...] = ()
    protected_tokens: frozenset[str] = frozenset()
    symbol_whitelist: frozenset[str] = DEFAULT_WHITELIST
    reference_markers: tuple[re.Pattern[str], ...] = DEFAULT_REFERENCE_MARKERS

    def __post_init__(self) -> None:
        sources = [src for src, _ in self.normalization_map]
        if any(not src for src in sources):
            raise ValueError("empty substitution source")
        for _, dst in self.normalization_map:
            for src in sources:
                if src in dst:
                    raise ValueError(
                        f"replacement {dst!r} contains rule source {src!r}; "
                        "this would break idempotence"
                    )

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleSet":
        """Load a rule set from a sectioned plain-text config.

        Sections are introduced by ``[map]``, ``[whitelist]`` and
        ``[protected]`` lines.  Map lines are tab-separated
        ``variant<TAB>canonical`` pairs.  Whitelist lines are
        space-separated items, each either a single character, an ``a-z``
        style range, or the word ``space``.  Protected lines hold one
        token each.  Lines starting with ``#`` are comments.
        """
        pairs: list[tuple[str, str]] = []
        chars: set[str] = set()
        protected: set[str] = set()
        section = "map"
        for raw_line in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw_line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            stripped = line.strip()
            if stripped in ("[map]", "[whitelist]", "[protected]"):
                section = stripped[1:-1]
                continue
            if section == "map":
                src, sep, dst = line.partition("\t")
                if not sep:
                    raise ValueError(f"map line without tab separator: {line!r}")
                pairs.append((src, dst))
            elif section == "whitelist":
                for item in stripped.split():
                    if item == "space":
                        chars.add(" ")
                    elif len(item) == 3 and item[1] == "-":
                        lo, hi = ord(item[0]), ord(item[2])
                        if lo > hi:
                            raise ValueError(f"bad character range: {item!r}")
                        chars.update(chr(c) for c in range(lo, hi + 1))
                    else:
                        chars.update(item)
            else:
                protected.add(stripped)
        whitelist = frozenset(chars) if chars else DEFAULT_WHITELIST
        return cls(
            normalization_map=tuple(pairs),
            protected_tokens=frozenset(protected),
            symbol_whitelist=whitelist | {" "},
        )


def _substitution_pattern(rules: RuleSet) -> re.Pattern[str] | None:
    if not rules.normalization_map:
        return None
    ordered = sorted(rules.normalization_map, key=lambda kv: -len(kv[0]))
    return re.compile("|".join(re.escape(src) for src, _ in ordered))


def normalize(text: str, rules: RuleSet) -> str:
    """Apply the rule set's substitutions, longest match first.

    A single left-to-right pass; replacements are never re-scanned, which
    together with the RuleSet construction check makes the operation
    idempotent.
    """
    pattern = _substitution_pattern(rules)
    if pattern is None:
        return text
    mapping = dict(rules.normalization_map)
    return pattern.sub(lambda m: mapping[m.group(0)], text)


def remove_references(
    text: str,
    markers: Sequence[re.Pattern[str]] | None = None,
) -> str:
    """Drop inline bracketed references, trailing reference blocks and URL lines.

    A reference block starts at the first line that both begins after
    ``REFERENCE_TAIL_FRACTION`` of the text and matches one of the marker
    patterns; everything from that line on is dropped.  Any remaining line
    containing a URL is removed whole.
    """
    if markers is None:
        markers = DEFAULT_REFERENCE_MARKERS
    text = _BRACKET_REF_RE.sub("", text)
    lines = text.split("\n")
    total = len(text)
    cut: int | None = None
    offset = 0
    for idx, line in enumerate(lines):
        if offset >= REFERENCE_TAIL_FRACTION * total and any(
            p.search(line) for p in markers
        ):
            cut = idx
            break
        offset += len(line) + 1
    if cut is not None:
        lines = lines[:cut]
    lines = [line for line in lines if not _URL_RE.search(line)]
    return "\n".join(lines)


def verbalize_numbers(text: str, verbalizer: Verbalizer) -> str:
    """Replace every maximal digit run with its spoken form.

    Tokens the hook rejects (``VerbalizerFailure``) are left in place and
    logged, so one odd numeral never aborts a whole file.
    """

    def repl(match: re.Match[str]) -> str:
        token = match.group(0)
        try:
            return verbalizer(token)
        except VerbalizerFailure as exc:
            log.warning("verbalizer rejected %r: %s", token, exc)
            return token

    return _DIGIT_RUN_RE.sub(repl, text)


def clean_symbols_and_whitespace(text: str, rules: RuleSet) -> str:
    """Drop characters outside the whitelist and flatten whitespace.

    Protected tokens pass through verbatim.  All whitespace runs, empty
    lines included, collapse to single spaces; the result carries no
    leading or trailing whitespace.
    """
    tokens = sorted(rules.protected_tokens, key=len, reverse=True)
    saved: list[str] = []
    if tokens:
        pattern = re.compile("|".join(re.escape(t) for t in tokens))
        pieces = pattern.split(text)
        saved = pattern.findall(text)
    else:
        pieces = [text]
    cleaned_pieces = [
        "".join(ch for ch in piece if ch.isspace() or ch in rules.symbol_whitelist)
        for piece in pieces
    ]
    # Sentinel stands in for each protected token through the collapse.
    joined = "\x00".join(cleaned_pieces) if saved else cleaned_pieces[0]
    collapsed = " ".join(joined.split())
    if not saved:
        return collapsed
    parts = collapsed.split("\x00")
    out = parts[0]
    for token, part in zip(saved, parts[1:]):
        out += token + part
    return out


def _kept_chars(ch: str) -> str:
    """CER-normalized expansion of one character ('' when dropped).

    Lowercasing may expand to several characters; any non-alphanumeric
    byproduct (combining marks) is dropped so the mapping is idempotent.
    """
    if ch.isspace():
        return " "
    if ch.isalnum():
        lowered = ch.lower()
        return "".join(c for c in lowered if c.isalnum())
    return ""


def cer_normalize(text: str) -> str:
    """Reduce text to the form CERs are computed on.

    Lowercases, drops punctuation and symbols, collapses whitespace runs
    to single spaces and strips the ends.  Idempotent.
    """
    out: list[str] = []
    pending_space = False
    for ch in text:
        mapped = _kept_chars(ch)
        if mapped == " ":
            pending_space = True
            continue
        if not mapped:
            continue
        if pending_space and out:
            out.append(" ")
        pending_space = False
        out.append(mapped)
    return "".join(out)


def prepare_reference(text: str, rules: RuleSet, verbalizer: Verbalizer) -> str:
    """Run the full cleaning chain over a raw reference transcript."""
    text = normalize(text, rules)
    text = remove_references(text, rules.reference_markers)
    text = verbalize_numbers(text, verbalizer)
    return clean_symbols_and_whitespace(text, rules)


_ONES = (
    "zero one two three four five six seven eight nine ten eleven twelve "
    "thirteen fourteen fifteen sixteen seventeen eighteen nineteen"
).split()
_TENS = "zero ten twenty thirty forty fifty sixty seventy eighty ninety".split()
_SCALES = ((10**9, "billion"), (10**6, "million"), (10**3, "thousand"))


def english_number_words(token: str) -> str:
    """Builtin test-language verbalizer: unsigned cardinals up to 10**12."""
    try:
        value = int(token)
    except ValueError as exc:
        raise VerbalizerFailure(str(exc)) from exc
    if value < 0 or value > 10**12:
        raise VerbalizerFailure(f"out of range: {value}")
    return _cardinal(value)


def _cardinal(value: int) -> str:
    if value < 20:
        return _ONES[value]
    if value < 100:
        tens, rest = divmod(value, 10)
        return _TENS[tens] + ("-" + _ONES[rest] if rest else "")
    if value < 1000:
        hundreds, rest = divmod(value, 100)
        head = _ONES[hundreds] + " hundred"
        return head + (" " + _cardinal(rest) if rest else "")
    if value == 10**12:
        return "one trillion"
    for scale, name in _SCALES:
        if value >= scale:
            count, rest = divmod(value, scale)
            head = _cardinal(count) + " " + name
            return head + (" " + _cardinal(rest) if rest else "")
    raise AssertionError("unreachable")
