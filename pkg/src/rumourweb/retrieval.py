"""Query execution against pluggable search backends.

Two backends share one contract: a deterministic offline index over a JSON
Lines corpus (the reproducible path used by tests and fixtures) and a thin
HTTP client for a live search API. Both honour the query's date cutoff
exclusively: a document dated on or after the cutoff is never returned.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Protocol

import httpx

from .errors import BackendUnavailable, QuotaExceeded
from .query_builder import Query

logger = logging.getLogger(__name__)

BM25_K1 = 1.2
BM25_B = 0.75
PARAGRAPH_MIN_CHARS = 20

_TERM_RE = re.compile(r"\w+")

# injectable for tests
_sleep = time.sleep


@dataclass(frozen=True)
class SearchResult:
    url: str
    rank: int
    backend_name: str


@dataclass(frozen=True)
class ArticleDoc:
    """A fetched evidence page; empty means missing title or body text."""

    url: str
    title: str
    paragraphs: tuple[str, ...]
    retrieved_rank: int = 0
    fetch_date: datetime = datetime(1970, 1, 1, tzinfo=timezone.utc)
    is_empty: bool = False

    def __post_init__(self):
        expected = (not self.title) or (not self.paragraphs)
        if self.is_empty != expected:
            object.__setattr__(self, "is_empty", expected)


def make_article(
    url: str,
    title: str,
    paragraphs,
    retrieved_rank: int = 0,
    fetch_date: datetime | None = None,
) -> ArticleDoc:
    return ArticleDoc(
        url=url,
        title=title,
        paragraphs=tuple(paragraphs),
        retrieved_rank=retrieved_rank,
        fetch_date=fetch_date or datetime(1970, 1, 1, tzinfo=timezone.utc),
        is_empty=(not title) or (not tuple(paragraphs)),
    )


class SearchBackend(Protocol):
    name: str
    supports_date_filter: bool

    def run(self, query: Query, limit: int, offset: int) -> list[SearchResult]: ...

    def fetch(self, result: SearchResult, query: Query) -> ArticleDoc: ...


def index_terms(text: str) -> list[str]:
    return [t.lower() for t in _TERM_RE.findall(text)]


@dataclass(frozen=True)
class _CorpusDoc:
    doc_id: int
    url: str
    title: str
    paragraphs: tuple[str, ...]
    publish_date: date


class OfflineCorpusIndex:
    """BM25 inverted index over a JSON Lines document corpus.

    Fully deterministic: scoring iterates terms in sorted order and ties are
    broken by URL, so identical corpus + query always give identical results.
    Read-only once built; safe to share across threads.
    """

    def __init__(self, docs: list[dict]):
        self.docs: list[_CorpusDoc] = []
        self._by_url: dict[str, _CorpusDoc] = {}
        self._postings: dict[str, list[tuple[int, int]]] = {}
        self._doc_lens: list[int] = []
        for raw in docs:
            doc = _CorpusDoc(
                doc_id=len(self.docs),
                url=raw["url"],
                title=raw.get("title", ""),
                paragraphs=tuple(raw.get("paragraphs", ())),
                publish_date=date.fromisoformat(raw["publish_date"]),
            )
            self.docs.append(doc)
            self._by_url[doc.url] = doc
            terms = index_terms(" ".join((doc.title,) + doc.paragraphs))
            self._doc_lens.append(len(terms))
            tf: dict[str, int] = {}
            for t in terms:
                tf[t] = tf.get(t, 0) + 1
            for t, f in tf.items():
                self._postings.setdefault(t, []).append((doc.doc_id, f))
        for plist in self._postings.values():
            plist.sort()
        n = len(self.docs)
        self.avg_doc_len = (sum(self._doc_lens) / n) if n else 0.0

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "OfflineCorpusIndex":
        docs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    docs.append(json.loads(line))
        return cls(docs)

    def __len__(self) -> int:
        return len(self.docs)

    def get(self, url: str) -> _CorpusDoc | None:
        return self._by_url.get(url)

    def _idf(self, term: str) -> float:
        df = len(self._postings.get(term, ()))
        if df == 0:
            return 0.0
        n = len(self.docs)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score(self, terms: set[str], doc_id: int) -> float:
        """BM25 score of one document for a set of query terms."""
        dl = self._doc_lens[doc_id]
        norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / self.avg_doc_len)
        total = 0.0
        for term in sorted(terms):
            plist = self._postings.get(term)
            if not plist:
                continue
            tf = next((f for d, f in plist if d == doc_id), 0)
            if tf == 0:
                continue
            total += self._idf(term) * (tf * (BM25_K1 + 1.0)) / (tf + norm)
        return total


def rank_offline(index: OfflineCorpusIndex, q: Query, k: int) -> list[SearchResult]:
    """Date-filter, score, and rank the offline corpus for a query.

    OR-group words join the query terms as optional extra matches; documents
    scoring zero are dropped; ties break on URL so the ordering is total.
    """
    terms = set(index_terms(" ".join(q.body_tokens)))
    for group in q.or_group:
        terms.update(w.lower() for w in group)
    candidates = [d for d in index.docs if d.publish_date < q.date_cutoff]
    scored = []
    for doc in candidates:
        s = index.score(terms, doc.doc_id)
        if s > 0.0:
            scored.append((-s, doc.url, doc))
    scored.sort(key=lambda item: (item[0], item[1]))
    return [
        SearchResult(url=doc.url, rank=i + 1, backend_name="offline")
        for i, (_, _, doc) in enumerate(scored[:k])
    ]


class OfflineSearchBackend:
    """Deterministic backend over an OfflineCorpusIndex."""

    supports_date_filter = True

    def __init__(self, index: OfflineCorpusIndex, name: str = "offline"):
        self.index = index
        self.name = name

    def run(self, query: Query, limit: int, offset: int) -> list[SearchResult]:
        full = rank_offline(self.index, query, offset + limit)
        return full[offset : offset + limit]

    def fetch(self, result: SearchResult, query: Query) -> ArticleDoc:
        doc = self.index.get(result.url)
        if doc is None:
            return make_article(result.url, "", (), result.rank, self._fetch_date(query))
        return make_article(
            doc.url, doc.title, doc.paragraphs, result.rank, self._fetch_date(query)
        )

    @staticmethod
    def _fetch_date(query: Query) -> datetime:
        # Pinned to the query date so offline runs are byte-reproducible.
        d = query.date_cutoff
        return datetime(d.year, d.month, d.day, tzinfo=timezone.utc)


class RateLimiter:
    """Minimum-interval limiter shared by all requests to one host."""

    def __init__(self, requests_per_second: float):
        self.interval = 1.0 / requests_per_second if requests_per_second > 0 else 0.0
        self._last = 0.0
        self._lock = threading.Lock()

    def wait(self):
        if self.interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delta = self._last + self.interval - now
            if delta > 0:
                _sleep(delta)
            self._last = time.monotonic()


class LiveSearchBackend:
    """Thin HTTP client over a configurable search API.

    The API is expected to accept GET {endpoint}?q=...&count=...&offset=...
    and answer {"results": [{"url": ...}, ...]}. The rendered "before:" term
    is passed through verbatim; engines without date support are declared via
    supports_date_filter=False and must be filtered downstream.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        requests_per_second: float = 1.0,
        client: httpx.Client | None = None,
        supports_date_filter: bool = True,
    ):
        self.endpoint = endpoint or os.environ.get("RUMOURWEB_SEARCH_ENDPOINT", "")
        self.api_key = api_key or os.environ.get("RUMOURWEB_SEARCH_API_KEY", "")
        if not self.endpoint:
            raise BackendUnavailable("no live search endpoint configured")
        self.name = "live"
        self.supports_date_filter = supports_date_filter
        self._limiter = RateLimiter(requests_per_second)
        self._client = client or httpx.Client(timeout=20.0)

    def run(self, query: Query, limit: int, offset: int) -> list[SearchResult]:
        from .query_builder import render

        params = {"q": render(query), "count": limit, "offset": offset}
        headers = {"X-Api-Key": self.api_key} if self.api_key else {}
        self._limiter.wait()
        resp = self._client.get(self.endpoint, params=params, headers=headers)
        if resp.status_code == 429:
            raise QuotaExceeded(f"search API returned 429 for {self.endpoint}")
        resp.raise_for_status()
        urls = [r["url"] for r in resp.json().get("results", [])]
        return [
            SearchResult(url=u, rank=offset + i + 1, backend_name=self.name)
            for i, u in enumerate(urls)
        ]

    def fetch(self, result: SearchResult, query: Query) -> ArticleDoc:
        self._limiter.wait()
        resp = self._client.get(result.url, follow_redirects=True)
        resp.raise_for_status()
        return extract_article(
            resp.text,
            result.url,
            retrieved_rank=result.rank,
            fetch_date=datetime.now(timezone.utc),
        )


def _with_retries(fn, *args, attempts: int = 3, base_delay: float = 1.0):
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return fn(*args)
        except QuotaExceeded:
            raise
        except (httpx.HTTPError, ConnectionError, TimeoutError, OSError) as exc:
            last = exc
            if attempt + 1 < attempts:
                _sleep(base_delay * (2**attempt))
    raise BackendUnavailable(f"backend failed after {attempts} attempts: {last}")


def search(
    q: Query, backend: SearchBackend, want: int = 5, max_in_flight: int = 1
) -> list[ArticleDoc]:
    """Collect up to `want` non-empty articles, digging past empty results.

    Empty pages (no title or no body text) never count toward the quota; the
    backend is asked for deeper ranks until either enough non-empty documents
    are found or its results run out. With max_in_flight > 1 page fetches run
    on a bounded thread pool (rank order is preserved either way).
    """
    collected: list[ArticleDoc] = []
    offset = 0
    batch = max(want, 5)
    while len(collected) < want:
        results = _with_retries(backend.run, q, batch, offset)
        if not results:
            break
        if max_in_flight > 1:
            with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
                docs = list(pool.map(lambda r: _with_retries(backend.fetch, r, q), results))
        else:
            docs = [_with_retries(backend.fetch, result, q) for result in results]
        for doc in docs:
            if not doc.is_empty:
                collected.append(doc)
                if len(collected) == want:
                    break
        offset += len(results)
    return collected


_JUNK_RE = re.compile(
    r"(nav|menu|breadcrumb|masthead|sidebar|related|promo|sponsor|subscribe|"
    r"newsletter|social|share|signin|login|cookie|advert|ads|banner|widget|"
    r"comment|trending|popular|recommend|copyright|footer|header)",
    re.I,
)
_SKIP_TAGS = frozenset(
    {"script", "style", "noscript", "nav", "header", "footer", "aside", "form",
     "button", "select", "svg", "iframe"}
)
_BLOCK_TAGS = frozenset(
    {"p", "div", "section", "article", "li", "td", "blockquote", "pre", "br",
     "h1", "h2", "h3", "h4", "h5", "h6", "tr", "ul", "ol", "table", "main", "body"}
)


_VOID_TAGS = frozenset(
    {"br", "img", "hr", "meta", "link", "input", "area", "base", "col",
     "embed", "source", "track", "wbr"}
)


class _ArticleHTMLParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.title_parts: list[str] = []
        self.h1_parts: list[str] = []
        self.paragraphs: list[str] = []
        self._buffer: list[str] = []
        self._skip_stack: list[str] = []  # open tags inside a skipped region
        self._in_title = False
        self._h1_open = False
        self._saw_h1 = False

    def _flush(self):
        text = " ".join("".join(self._buffer).split())
        self._buffer = []
        if len(text) >= PARAGRAPH_MIN_CHARS:
            self.paragraphs.append(text)

    def handle_starttag(self, tag, attrs):
        if tag in _VOID_TAGS:
            return
        if self._skip_stack:
            self._skip_stack.append(tag)
            return
        attr_blob = " ".join(str(v) for k, v in attrs if k in ("class", "id") and v)
        if tag in _SKIP_TAGS or _JUNK_RE.search(attr_blob):
            self._skip_stack.append(tag)
            return
        if tag == "title":
            self._in_title = True
        elif tag == "h1" and not self._saw_h1:
            self._h1_open = True
            self._saw_h1 = True
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_endtag(self, tag):
        if tag in _VOID_TAGS:
            return
        if self._skip_stack:
            if tag in self._skip_stack:
                # pop back through the most recent matching open tag,
                # tolerating unclosed children in sloppy markup
                idx = len(self._skip_stack) - 1 - self._skip_stack[::-1].index(tag)
                del self._skip_stack[idx:]
            return
        if tag == "title":
            self._in_title = False
        elif tag == "h1":
            self._h1_open = False
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_data(self, data):
        if self._skip_stack:
            return
        if self._in_title:
            self.title_parts.append(data)
        elif self._h1_open:
            self.h1_parts.append(data)
        else:
            self._buffer.append(data)

    def close(self):
        super().close()
        self._flush()


_HTML_HINT_RE = re.compile(r"<\s*(html|head|body|title|p|div|article|h1|meta|!doctype)\b", re.I)


def extract_article(
    blob: str,
    url: str,
    retrieved_rank: int = 0,
    fetch_date: datetime | None = None,
) -> ArticleDoc:
    """Extract title and body paragraphs from HTML or plain text.

    Paragraphs are whitespace-normalised block runs of at least 20 characters;
    navigation and other boilerplate blocks are dropped by tag and class/id
    heuristics. Never raises: an unusable blob yields an empty ArticleDoc.
    """
    title = ""
    paragraphs: list[str] = []
    if _HTML_HINT_RE.search(blob):
        parser = _ArticleHTMLParser()
        try:
            parser.feed(blob)
            parser.close()
        except Exception:  # malformed markup: keep whatever was collected
            logger.debug("html parse error for %s", url, exc_info=True)
        title = " ".join("".join(parser.title_parts).split())
        if not title:
            title = " ".join("".join(parser.h1_parts).split())
        paragraphs = parser.paragraphs
    else:
        raw_blocks = [b for b in re.split(r"\n\s*\n", blob) if b.strip()]
        blocks = [" ".join(b.split()) for b in raw_blocks]
        if blocks and "\n" not in raw_blocks[0].strip() and len(blocks[0]) <= 100:
            title = blocks[0]
            blocks = blocks[1:]
        paragraphs = [b for b in blocks if len(b) >= PARAGRAPH_MIN_CHARS]
    return make_article(url, title, paragraphs, retrieved_rank, fetch_date)
