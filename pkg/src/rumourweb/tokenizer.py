"""Treebank-style tokenization and sentence splitting shared across the toolkit.

The tokenizer only ever inserts whitespace: joining the output tokens and
stripping whitespace reproduces the input exactly, which the preprocessing
conservation checks rely on.
"""

from __future__ import annotations

import re

# Lowercased tokens whose trailing period stays attached.
ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "gen", "rep", "sen", "gov",
        "sgt", "col", "lt", "capt", "st", "mt", "ave", "jr", "sr", "dept",
        "univ", "assn", "bros", "inc", "ltd", "co", "corp", "vs", "etc",
        "approx", "est", "min", "max", "no", "vol", "jan", "feb", "mar",
        "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
    }
)

# Suffixes split off when a non-empty stem precedes them; a bare suffix
# token ("n't", "'s") is left alone so re-tokenization is a no-op.
_CONTRACTION_SUFFIXES = ("n't", "'re", "'ve", "'ll", "'em", "'s", "'d", "'m")

_ELLIPSIS_RE = re.compile(r"(\.\.\.+|…)")
_PUNCT_RE = re.compile(r'([,;:?!()\[\]{}<>"“”„«»—–])')


def _split_token(tok: str) -> list[str]:
    if len(tok) <= 1:
        return [tok]
    # Opening straight quote.
    if tok.startswith("'") and tok.lower() not in _CONTRACTION_SUFFIXES:
        return ["'"] + _split_token(tok[1:])
    # Sentence-final period, unless the core looks like an abbreviation.
    if tok.endswith(".") and not tok.endswith("..."):
        core = tok[:-1]
        if core and "." not in core and core.lower() not in ABBREVIATIONS:
            return _split_token(core) + ["."]
        return [tok]
    # Trailing possessive / closing quote.
    if tok.endswith("'") and not any(
        tok.lower().endswith(s + "'") for s in _CONTRACTION_SUFFIXES
    ):
        return _split_token(tok[:-1]) + ["'"]
    lowered = tok.lower()
    for suffix in _CONTRACTION_SUFFIXES:
        if lowered.endswith(suffix) and len(tok) > len(suffix):
            stem = tok[: -len(suffix)]
            return _split_token(stem) + [tok[-len(suffix):]]
    return [tok]


_LONE_HASH_RE = re.compile(r"#(?!\w)")


def tokenize(text: str) -> list[str]:
    """Tokenize `text` treebank-style: punctuation split off, case kept.

    '#' stays attached only when it starts a hashtag (followed by a word
    character); otherwise it separates like any other punctuation.
    """
    s = _ELLIPSIS_RE.sub(r" \1 ", text)
    s = _PUNCT_RE.sub(r" \1 ", s)
    s = _LONE_HASH_RE.sub(" # ", s)
    tokens: list[str] = []
    for raw in s.split():
        tokens.extend(_split_token(raw))
    return tokens


_BOUNDARY_RE = re.compile(r"([.!?]+)(['\")\]]*)(\s+)")
_OPENER_RE = re.compile(r"[A-Z0-9\"“'‘(\[]")


def split_sentences(text: str) -> list[str]:
    """Split a paragraph into sentences on ./!/? followed by an opener.

    Boundaries after known abbreviations or single-letter initials are
    ignored. Paragraph boundaries are handled by the caller; this never
    splits across newlines that survive whitespace normalisation.
    """
    sentences: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end(1) + len(m.group(2))
        follow = text[m.end():]
        if not follow or not _OPENER_RE.match(follow):
            continue
        before = text[start : m.start(1)].rstrip()
        last_word = before.rsplit(None, 1)[-1] if before else ""
        core = last_word.rstrip(".").lower()
        if m.group(1) == ".":
            if core in ABBREVIATIONS or (len(core) == 1 and core.isalpha()):
                continue
            if "." in last_word.rstrip("."):  # e.g. "U.S."
                continue
        chunk = text[start:end].strip()
        if chunk:
            sentences.append(chunk)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences
