"""Retrieval-quality metrics over a pluggable embedding store.

Three scores, all in [0, 1]: cosine similarity of URL words against the URLs
posted in thread responses, cosine similarity of the leading article units
(title plus first two paragraphs) against the rumour, and the same unit
structure delegated to an external pairwise scorer process.
"""

from __future__ import annotations

import json
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from urllib.parse import urlsplit

import numpy as np

from .errors import NoKnownWords, NoScorablePairs, ScorerUnavailable, UnparseableUrl
from .query_builder import Strategy
from .retrieval import ArticleDoc
from .text_prep import PreprocessedTweet, SegmentationDictionary, segment_hashtag

_ALPHA_RUN_RE = re.compile(r"[A-Za-z]+")
_WORD_RE = re.compile(r"[a-z0-9']+")

# Navigational tokens never useful as URL content words.
URL_NOISE_TOKENS = frozenset(
    {
        "http", "https", "www", "html", "htm", "php", "asp", "aspx", "amp",
        "index", "story", "article", "page", "cgi", "jsp",
        "com", "org", "net", "edu", "gov", "mil", "int", "info", "biz",
        "io", "co", "uk", "au", "ca", "de", "fr", "nz", "us", "eu", "tv",
    }
)


class EmbeddingStore:
    """Word vectors with lowercase lookup; absent words are absent, never zero."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        if not vectors:
            raise ValueError("embedding store must hold at least one vector")
        self._vectors = {w.lower(): np.asarray(v, dtype=np.float64) for w, v in vectors.items()}
        dims = {v.shape for v in self._vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")
        self.dimension = next(iter(dims))[0]

    @classmethod
    def from_text_file(cls, path: str | Path) -> "EmbeddingStore":
        """Load whitespace-separated "word v1 ... vd" lines; dim from line 1."""
        vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip().split()
                if len(parts) < 2:
                    continue
                vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
        return cls(vectors)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def lookup(self, word: str) -> np.ndarray | None:
        return self._vectors.get(word.lower())

    def mean_vector(self, words: Iterable[str]) -> np.ndarray | None:
        """Mean of the in-vocabulary word vectors; None if every word is unknown."""
        found = [self._vectors[w.lower()] for w in words if w.lower() in self._vectors]
        if not found:
            return None
        return np.mean(found, axis=0)


def _cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na < 1e-12 or nb < 1e-12:
        return None
    return float(np.dot(a, b) / (na * nb))


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def url_words(
    url: str,
    dictionary: SegmentationDictionary,
    stopwords: frozenset[str] = frozenset(),
) -> list[str]:
    """Content words carried by a URL's path.

    The path is split on '/', '-', '_' and '.', digits are dropped, and each
    alphabetic run is segmented into dictionary words. Hostname labels,
    scheme tokens, TLD-like fragments, stopwords, and single letters are all
    removed: they describe the site, not the page.
    """
    parts = urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise UnparseableUrl(url)
    words: list[str] = []
    for segment in parts.path.split("/"):
        for piece in re.split(r"[-_.]", segment):
            for run in _ALPHA_RUN_RE.findall(piece):
                for word in segment_hashtag(run, dictionary):
                    w = word.lower()
                    if len(w) <= 1 or w in URL_NOISE_TOKENS or w in stopwords:
                        continue
                    words.append(w)
    return words


def url_words_score(
    articles: Sequence[ArticleDoc],
    response_urls: Sequence[str],
    store: EmbeddingStore,
    dictionary: SegmentationDictionary,
    stopwords: frozenset[str] = frozenset(),
) -> float:
    """Mean cosine between article URL words and each response URL's words.

    Every (article, response URL) pair contributes one cosine; pairs where
    either side has no in-vocabulary words are skipped. Negative cosines
    clamp to zero so the score stays in [0, 1].
    """
    pair_scores = _url_pair_scores(articles, response_urls, store, dictionary, stopwords)
    if not pair_scores:
        raise NoScorablePairs("no (article, response URL) pair has known words")
    return float(np.mean(pair_scores))


def _url_pair_scores(articles, response_urls, store, dictionary, stopwords) -> list[float]:
    response_vecs = []
    for url in response_urls:
        try:
            vec = store.mean_vector(url_words(url, dictionary, stopwords))
        except UnparseableUrl:
            vec = None
        if vec is not None:
            response_vecs.append(vec)
    scores: list[float] = []
    for article in articles:
        try:
            avec = store.mean_vector(url_words(article.url, dictionary, stopwords))
        except UnparseableUrl:
            avec = None
        if avec is None:
            continue
        for rvec in response_vecs:
            c = _cosine(avec, rvec)
            if c is not None:
                scores.append(_clamp01(c))
    return scores


def _article_units(article: ArticleDoc) -> list[str]:
    units = [article.title] + list(article.paragraphs)
    return [u for u in units if u.strip()][:3]


def paragraph_score(
    article: ArticleDoc, rumour: PreprocessedTweet, store: EmbeddingStore
) -> float:
    """Mean cosine between the rumour and the article's first three units.

    The title counts as the first unit. Unknown words are ignored; a unit
    with no known words contributes nothing, and if no unit (or the rumour)
    has known words NoKnownWords is raised.
    """
    rumour_vec = store.mean_vector(_unit_words(rumour.text))
    if rumour_vec is None:
        raise NoKnownWords("rumour has no in-vocabulary words")
    scores = []
    for unit in _article_units(article):
        unit_vec = store.mean_vector(_unit_words(unit))
        if unit_vec is None:
            continue
        c = _cosine(unit_vec, rumour_vec)
        if c is not None:
            scores.append(_clamp01(c))
    if not scores:
        raise NoKnownWords(f"no unit of {article.url} has in-vocabulary words")
    return float(np.mean(scores))


def _unit_words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


class SubprocessScorer:
    """Client for an external pairwise scorer over line-delimited JSON.

    The scorer process reads {"a": ..., "b": ...} per line on stdin and
    answers {"score": ...} per line on stdout. Any transport failure raises
    ScorerUnavailable.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise ScorerUnavailable(f"cannot start scorer {self.command}: {exc}")
        return self._proc

    def score(self, a: str, b: str) -> float:
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps({"a": a, "b": b}) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (OSError, ValueError) as exc:
            raise ScorerUnavailable(f"scorer transport failed: {exc}")
        if not line:
            raise ScorerUnavailable("scorer closed its output stream")
        try:
            return float(json.loads(line)["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScorerUnavailable(f"scorer answered malformed line: {line!r} ({exc})")

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_score(article: ArticleDoc, rumour: PreprocessedTweet, scorer) -> float:
    """Unit-structured relevance via the external scorer: mean over units."""
    units = _article_units(article)
    if not units:
        raise NoKnownWords(f"article {article.url} has no scorable units")
    rumour_text = rumour.text
    return float(np.mean([_clamp01(scorer.score(unit, rumour_text)) for unit in units]))


@dataclass(frozen=True)
class EvidenceBundle:
    """One rumour with its thread response URLs and retrieved articles."""

    rumour: PreprocessedTweet
    response_urls: tuple[str, ...]
    articles: tuple[ArticleDoc, ...]


@dataclass(frozen=True)
class MetricReport:
    strategy: Strategy
    url_words_score: float
    paragraph_embed_score: float
    external_score: float | None
    n_articles: int

    def __post_init__(self):
        for name in ("url_words_score", "paragraph_embed_score", "external_score"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if self.n_articles < 0:
            raise ValueError("n_articles must be >= 0")


def compare_strategies(
    evidence: Mapping[Strategy, Sequence[EvidenceBundle]],
    url_store: EmbeddingStore,
    paragraph_store: EmbeddingStore,
    dictionary: SegmentationDictionary,
    stopwords: frozenset[str] = frozenset(),
    scorer=None,
) -> tuple[list[MetricReport], dict[str, list[Strategy]]]:
    """Score each strategy's evidence and rank strategies per metric.

    URL-word cosines pool every (article, own-thread response URL) pair
    across the dataset; the paragraph and external metrics average per
    article. Returns the per-strategy reports plus, for each metric, the
    strategies in descending score order.
    """
    reports: list[MetricReport] = []
    for strategy in sorted(evidence, key=lambda s: s.value):
        bundles = evidence[strategy]
        url_pair_scores: list[float] = []
        para_scores: list[float] = []
        ext_scores: list[float] = []
        n_articles = 0
        for bundle in bundles:
            n_articles += len(bundle.articles)
            url_pair_scores.extend(
                _url_pair_scores(
                    bundle.articles, bundle.response_urls, url_store, dictionary, stopwords
                )
            )
            for article in bundle.articles:
                try:
                    para_scores.append(paragraph_score(article, bundle.rumour, paragraph_store))
                except NoKnownWords:
                    continue
        if scorer is not None:
            for bundle in bundles:
                for article in bundle.articles:
                    try:
                        ext_scores.append(external_score(article, bundle.rumour, scorer))
                    except NoKnownWords:
                        continue
        reports.append(
            MetricReport(
                strategy=strategy,
                url_words_score=float(np.mean(url_pair_scores)) if url_pair_scores else 0.0,
                paragraph_embed_score=float(np.mean(para_scores)) if para_scores else 0.0,
                external_score=(float(np.mean(ext_scores)) if ext_scores else None)
                if scorer is not None
                else None,
                n_articles=n_articles,
            )
        )
    rankings: dict[str, list[Strategy]] = {}
    metric_keys = {
        "url_words": lambda r: r.url_words_score,
        "paragraph_embed": lambda r: r.paragraph_embed_score,
    }
    if any(r.external_score is not None for r in reports):
        metric_keys["external"] = lambda r: r.external_score or 0.0
    for metric, key in metric_keys.items():
        rankings[metric] = [
            r.strategy for r in sorted(reports, key=lambda r: (-key(r), r.strategy.value))
        ]
    return reports, rankings
