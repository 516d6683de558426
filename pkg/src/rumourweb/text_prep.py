"""Tweet normalisation and hashtag segmentation.

Cleaning order matters: URLs come out first (they often trail the text), then
user mentions are replaced, and only then is the trailing-hashtag run detected,
so a hashtag followed by nothing but a link still counts as trailing.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from pathlib import Path

from .errors import EmptyTweet
from .tokenizer import tokenize

URL_RE = re.compile(r"""(?:https?://|www\.)[^\s]*[^\s.,;:!?)\]}>'"”’]""")
MENTION_RE = re.compile(r"@\w+")
_TRAILING_TAG_RE = re.compile(r"(?:^|\s)(#\w+)\s*$")

MENTION_TOKEN = "user"


@dataclass(frozen=True)
class RawTweet:
    """A rumour tweet as it arrived from the source corpus."""

    id: str
    text: str
    created_at: date
    event: str
    author_handle: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("tweet id must be non-empty")
        if not isinstance(self.created_at, date):
            raise ValueError("created_at must be a calendar date")


@dataclass(frozen=True)
class PreprocessedTweet:
    """Clean token stream plus everything that was stripped along the way."""

    source_id: str
    tokens: tuple[str, ...]
    extracted_urls: tuple[str, ...] = ()
    trailing_hashtags: tuple[str, ...] = ()
    inner_hashtag_tokens: tuple[int, ...] = ()
    date_cutoff: date = date(1970, 1, 1)
    removed_mentions: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def preprocess(raw: RawTweet) -> PreprocessedTweet:
    """Normalise a raw tweet into a clean token stream.

    URLs are saved aside, every @mention becomes the literal token "user"
    (keeping the sentence shape intact), hashtags at the end of the text are
    pulled out whole, and mid-text hashtags stay in place with '#' stripped.
    Raises EmptyTweet if nothing survives.
    """
    text = raw.text
    urls = tuple(URL_RE.findall(text))
    text = URL_RE.sub(" ", text)

    mentions = tuple(MENTION_RE.findall(text))
    text = MENTION_RE.sub(f" {MENTION_TOKEN} ", text)

    trailing: list[str] = []
    while True:
        m = _TRAILING_TAG_RE.search(text)
        if not m:
            break
        trailing.insert(0, m.group(1)[1:])
        text = text[: m.start(1)]

    tokens: list[str] = []
    inner: list[int] = []
    for tok in tokenize(text):
        if tok.startswith("#") and len(tok) > 1:
            inner.append(len(tokens))
            tok = tok[1:]
        tokens.append(tok)

    if not tokens:
        raise EmptyTweet(raw.id)

    return PreprocessedTweet(
        source_id=raw.id,
        tokens=tuple(tokens),
        extracted_urls=urls,
        trailing_hashtags=tuple(trailing),
        inner_hashtag_tokens=tuple(inner),
        date_cutoff=raw.created_at,
        removed_mentions=mentions,
    )


class SegmentationDictionary:
    """Unigram frequency table backing hashtag and URL-word segmentation.

    Scores use additive smoothing, (count + 1) / (total + |V|), over
    lowercase words; the table is read-only once built.
    """

    def __init__(self, counts: dict[str, int]):
        self.counts = {w.lower(): int(c) for w, c in counts.items()}
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("word frequencies must be non-negative")
        self.total_count = sum(self.counts.values())
        self._denom = self.total_count + len(self.counts)

    @classmethod
    def from_file(cls, path: str | Path) -> "SegmentationDictionary":
        """Load a word<TAB>count table, one entry per line, UTF-8."""
        counts: dict[str, int] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                word, _, count = line.partition("\t")
                counts[word] = counts.get(word, 0) + int(count or 0)
        return cls(counts)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def log_prob(self, word: str) -> float:
        if self._denom == 0:
            return 0.0
        return math.log((self.counts.get(word.lower(), 0) + 1) / self._denom)


_CAMEL_RE = re.compile(
    r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])"
    r"|(?<=[A-Za-z])(?=[0-9])|(?<=[0-9])(?=[A-Za-z])"
)


def _best_split(tag: str, dictionary: SegmentationDictionary) -> list[str] | None:
    """Maximum-likelihood split of a lowercase tag into dictionary words.

    DP over end positions. Probabilities are compared as exact rationals
    (floating logs make ties order-dependent); ties go to fewer words, then
    to the split whose segments are leftmost-longest. Returns None when no
    full split exists.
    """
    n = len(tag)
    denominator = dictionary.total_count + len(dictionary)
    # best[i]: (smoothed-count numerator, word_count, neg_lengths, words)
    best: list[tuple | None] = [None] * (n + 1)
    best[0] = (1, 0, (), [])
    for end in range(1, n + 1):
        for start in range(end):
            if best[start] is None:
                continue
            word = tag[start:end]
            if word not in dictionary:
                continue
            numerator, count, lens, words = best[start]
            cand = (
                numerator * (dictionary.counts[word] + 1),
                count + 1,
                lens + (-len(word),),
                words + [word],
            )
            cur = best[end]
            if cur is None or _split_key(cand, denominator) < _split_key(cur, denominator):
                best[end] = cand
    if best[n] is None:
        return None
    return best[n][3]


def _split_key(cand: tuple, denominator: int):
    numerator, count, lens, _ = cand
    prob = Fraction(numerator, denominator**count) if denominator else Fraction(0)
    return (-prob, count, lens)


def segment_hashtag(tag: str, dictionary: SegmentationDictionary) -> list[str]:
    """Split a compound hashtag into words, preserving the original casing.

    CamelCase boundaries are hard splits; each piece is then segmented by
    unigram likelihood. A piece with no full dictionary split is returned
    unchanged, so the output always re-concatenates to the input.
    """
    if not tag:
        raise ValueError("tag must be non-empty")
    words: list[str] = []
    for piece in _CAMEL_RE.split(tag):
        split = _best_split(piece.lower(), dictionary)
        if split is None:
            words.append(piece)
            continue
        pos = 0
        for w in split:
            words.append(piece[pos : pos + len(w)])
            pos += len(w)
    return words


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a one-word-per-line stopword list (lowercased)."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)
