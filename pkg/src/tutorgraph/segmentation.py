"""Splitting free-text answers into elementary discourse units (EDUs).

An EDU is a clause-sized span. Token boundary labels mark which tokens
open a new unit; the first token always opens one. The heuristic
segmenter places boundaries at sentence starts, at discourse cue words,
and after attribution prefixes such as "I think", which become units of
their own.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_CUE_WORDS = (
    "because",
    "if",
    "while",
    "when",
    "after",
    "before",
    "but",
    "although",
    "so",
    "to",
    "which",
    "since",
)

DEFAULT_ATTRIBUTION_PREFIXES = (
    ("i", "think"),
    ("i", "believe"),
    ("we", "know"),
)

# "to" only opens a unit when it looks like an infinitive; a following
# determiner or capitalized word means it is probably not one.
_DETERMINERS = {"the", "a", "an", "this", "that", "these", "those"}

_SENTENCE_FINAL = {".", "?", "!", ";"}
_TRAILING_PUNCT = set(".,!?;:\"')]")


@dataclass(frozen=True)
class Token:
    text: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class EDU:
    text: str
    token_range: tuple[int, int]  # half-open [start, end) over the token list
    position: int
    solution_len: int


def tokenize(text: str) -> list[Token]:
    """Whitespace tokenization with trailing punctuation split off.

    Concatenating token texts with the original inter-token gaps
    reconstructs the source string exactly.
    """
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        end = j
        # peel trailing punctuation into separate single-char tokens
        while end > i + 1 and text[end - 1] in _TRAILING_PUNCT:
            end -= 1
        tokens.append(Token(text[i:end], i, end))
        for k in range(end, j):
            tokens.append(Token(text[k], k, k + 1))
        i = j
    return tokens


def _build_edus(text: str, tokens: list[Token], labels: list[int]) -> list[EDU]:
    starts = [i for i, bit in enumerate(labels) if bit == 1]
    spans = [(s, starts[idx + 1] if idx + 1 < len(starts) else len(tokens)) for idx, s in enumerate(starts)]
    total = len(spans)
    return [
        EDU(
            text=text[tokens[s].char_start : tokens[e - 1].char_end],
            token_range=(s, e),
            position=pos,
            solution_len=total,
        )
        for pos, (s, e) in enumerate(spans)
    ]


def apply_boundary_labels(text: str, tokens: list[Token], labels: list[int]) -> list[EDU]:
    """Materialize EDUs from per-token boundary bits (1 opens a unit)."""
    if len(labels) != len(tokens):
        raise ValueError(f"label/token length mismatch: {len(labels)} != {len(tokens)}")
    if not tokens:
        return []
    if labels[0] != 1:
        raise ValueError("first token must open an EDU")
    return _build_edus(text, tokens, labels)


def heuristic_boundary_labels(
    tokens: list[Token],
    cue_words: tuple[str, ...] = DEFAULT_CUE_WORDS,
    attribution_prefixes: tuple[tuple[str, ...], ...] = DEFAULT_ATTRIBUTION_PREFIXES,
) -> list[int]:
    """Predict boundary bits: sentence starts, cue tokens, attribution prefixes."""
    n = len(tokens)
    labels = [0] * n
    if n == 0:
        return labels
    labels[0] = 1
    lowered = [t.text.lower() for t in tokens]
    cue_set = set(cue_words)

    for i in range(1, n):
        # (a) token right after sentence-final punctuation starts a unit
        if lowered[i - 1] in _SENTENCE_FINAL:
            labels[i] = 1
        # (b) cue tokens open a unit at themselves
        if lowered[i] in cue_set:
            if lowered[i] == "to":
                nxt = tokens[i + 1].text if i + 1 < n else ""
                verb_like = bool(nxt) and not nxt[0].isupper() and nxt.lower() not in _DETERMINERS
                if not verb_like:
                    continue
            labels[i] = 1

    # (c) attribution prefixes become their own unit
    for prefix in attribution_prefixes:
        plen = len(prefix)
        for i in range(0, n - plen + 1):
            if tuple(lowered[i : i + plen]) == prefix:
                labels[i] = 1
                if i + plen < n:
                    labels[i + plen] = 1
    labels[0] = 1
    return labels


def segment_heuristic(
    text: str,
    cue_words: tuple[str, ...] = DEFAULT_CUE_WORDS,
    attribution_prefixes: tuple[tuple[str, ...], ...] = DEFAULT_ATTRIBUTION_PREFIXES,
) -> list[EDU]:
    """Segment raw text into EDUs with the boundary heuristic."""
    tokens = tokenize(text)
    if not tokens:
        return []
    labels = heuristic_boundary_labels(tokens, cue_words, attribution_prefixes)
    return _build_edus(text, tokens, labels)


def extract_boundary_labels(tokens: list[Token], edus: list[EDU]) -> list[int]:
    """Inverse of apply_boundary_labels: recover the bits from a segmentation."""
    labels = [0] * len(tokens)
    for edu in edus:
        labels[edu.token_range[0]] = 1
    return labels


def load_labeled_segments(path: str) -> list[tuple[str, list[int]]]:
    """Load external boundary labels: ``<text>\\t<bit bit ...>`` per line.

    Bits must match this module's tokenization of the text.
    """
    rows: list[tuple[str, list[int]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected <text>\\t<bits>")
            text, raw_bits = parts
            try:
                bits = [int(b) for b in raw_bits.split()]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer label bit") from exc
            if any(b not in (0, 1) for b in bits):
                raise ValueError(f"{path}:{lineno}: label bits must be 0 or 1")
            if len(bits) != len(tokenize(text)):
                raise ValueError(f"{path}:{lineno}: label count does not match tokenization")
            rows.append((text, bits))
    return rows
