"""Corpus loading, evidence joining, statistics, and the URL-overlap analysis.

The base corpus is a directory tree of per-event, per-thread folders holding
tweet records and a veracity annotation; the enriched dataset is versioned
JSON Lines with a header record carrying the schema version, config hash and
seed so reruns are diffable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

from .errors import (
    EmptyTweet,
    MalformedTweet,
    MissingAnnotation,
    SchemaVersionMismatch,
    UnparseableUrl,
)
from .retrieval import ArticleDoc, make_article
from .sentences import ScoredSentence, SelectionConfig, select_sentences
from .text_prep import URL_RE, RawTweet, preprocess
from .query_builder import Strategy

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_ARTICLES_PER_THREAD = 10


class Label(str, Enum):
    FALSE = "false"
    TRUE = "true"
    UNVERIFIED = "unverified"


# Deterministic tie order used by majority voting: False < True < Unverified.
LABEL_ORDER: tuple[Label, ...] = (Label.FALSE, Label.TRUE, Label.UNVERIFIED)


class Event(str, Enum):
    CHARLIE_HEBDO = "charliehebdo"
    SYDNEY_SIEGE = "sydneysiege"
    FERGUSON = "ferguson"
    OTTAWA_SHOOTING = "ottawashooting"
    GERMANWINGS_CRASH = "germanwings-crash"


EVENT_DISPLAY_NAMES = {
    Event.CHARLIE_HEBDO: "Charlie Hebdo",
    Event.SYDNEY_SIEGE: "Sydney Siege",
    Event.FERGUSON: "Ferguson",
    Event.OTTAWA_SHOOTING: "Ottawa Shooting",
    Event.GERMANWINGS_CRASH: "Germanwings Crash",
}


@dataclass(frozen=True)
class ThreadEntry:
    """A rumour thread: source tweet, reactions, and its gold veracity."""

    source: RawTweet
    reactions: tuple[RawTweet, ...]
    reaction_urls: tuple[str, ...]
    label: Label
    event: Event

    @property
    def thread_id(self) -> str:
        return self.source.id


@dataclass(frozen=True)
class EnrichedEntry:
    thread: ThreadEntry
    articles: tuple[ArticleDoc, ...]
    selected_sentences: tuple[ScoredSentence, ...]
    strategy_used: Strategy
    complete: bool

    def __post_init__(self):
        if len(self.articles) > MAX_ARTICLES_PER_THREAD:
            raise ValueError(f"more than {MAX_ARTICLES_PER_THREAD} articles attached")
        if any(a.is_empty for a in self.articles):
            raise ValueError("enriched entries must only carry non-empty articles")
        urls = {a.url for a in self.articles}
        for s in self.selected_sentences:
            if s.source_url not in urls:
                raise ValueError(f"sentence traces to unknown article {s.source_url!r}")


_TWITTER_DATE_FORMAT = "%a %b %d %H:%M:%S %z %Y"


def _parse_created_at(value) -> date:
    if isinstance(value, date) and not isinstance(value, datetime):
        return value
    text = str(value)
    try:
        return datetime.strptime(text, _TWITTER_DATE_FORMAT).astimezone(timezone.utc).date()
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00")).date()
    except ValueError:
        pass
    return date.fromisoformat(text)


def tweet_from_raw_record(record: dict, event: Event, origin: str = "") -> RawTweet:
    """Build a RawTweet from a corpus tweet record (Twitter-style or plain)."""
    try:
        tweet_id = str(record.get("id_str") or record["id"])
        text = record["text"]
        created = _parse_created_at(record["created_at"])
        user = record.get("user", {})
        handle = user.get("screen_name", "") if isinstance(user, dict) else ""
        handle = record.get("author_handle", handle)
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedTweet(origin or record.get("id", "?"), str(exc))
    return RawTweet(id=tweet_id, text=text, created_at=created, event=event.value,
                    author_handle=handle)


def label_from_annotation(record: dict, thread_id: str) -> Label:
    try:
        value = str(record.get("veracity") or record.get("label") or "").lower()
        return Label(value)
    except ValueError as exc:
        raise MissingAnnotation(thread_id) from exc


def _read_tweet(path: Path, event: Event) -> RawTweet:
    try:
        with open(path, encoding="utf-8") as fh:
            record = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedTweet(path, str(exc))
    return tweet_from_raw_record(record, event, origin=str(path))


def _read_label(path: Path, thread_id: str) -> Label:
    if not path.exists():
        raise MissingAnnotation(thread_id)
    try:
        with open(path, encoding="utf-8") as fh:
            record = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingAnnotation(thread_id) from exc
    return label_from_annotation(record, thread_id)


def thread_from_raw_records(
    event_name: str,
    thread_id: str,
    source: dict,
    reactions: Sequence[dict],
    annotation: dict,
) -> ThreadEntry:
    """Assemble a ThreadEntry from one thread folder's raw records."""
    event = Event(event_name)
    source_tweet = tweet_from_raw_record(source, event, origin=thread_id)
    reaction_tweets = tuple(
        tweet_from_raw_record(r, event, origin=thread_id) for r in reactions
    )
    label = label_from_annotation(annotation, thread_id)
    urls = tuple(u for r in reaction_tweets for u in URL_RE.findall(r.text))
    return ThreadEntry(
        source=source_tweet, reactions=reaction_tweets, reaction_urls=urls,
        label=label, event=event,
    )


def load_corpus(root: str | Path) -> list[ThreadEntry]:
    """Walk a per-event, per-thread corpus tree into ThreadEntry records.

    Layout: <root>/<event>/<thread_id>/source-tweets/<id>.json plus an
    optional reactions/ folder and a required annotation.json holding the
    veracity label. Reaction URLs are harvested from the reaction texts in
    reaction order.
    """
    root = Path(root)
    entries: list[ThreadEntry] = []
    for event_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            event = Event(event_dir.name)
        except ValueError:
            logger.warning("skipping unknown event directory %s", event_dir)
            continue
        for thread_dir in sorted(p for p in event_dir.iterdir() if p.is_dir()):
            thread_id = thread_dir.name
            source_files = sorted((thread_dir / "source-tweets").glob("*.json"))
            if not source_files:
                raise MalformedTweet(thread_dir, "no source tweet record")
            preferred = [p for p in source_files if p.stem == thread_id]
            source = _read_tweet((preferred or source_files)[0], event)
            reactions = tuple(
                _read_tweet(p, event)
                for p in sorted((thread_dir / "reactions").glob("*.json"))
            )
            label = _read_label(thread_dir / "annotation.json", thread_id)
            urls = tuple(u for r in reactions for u in URL_RE.findall(r.text))
            entries.append(
                ThreadEntry(
                    source=source, reactions=reactions, reaction_urls=urls,
                    label=label, event=event,
                )
            )
    return entries


@dataclass(frozen=True)
class EventStats:
    threads: int
    true: int
    false: int
    unverified: int
    articles: int


@dataclass(frozen=True)
class CorpusStats:
    per_event: dict[Event, EventStats]
    total: EventStats

    def __post_init__(self):
        for event, row in self.per_event.items():
            if row.true + row.false + row.unverified != row.threads:
                raise ValueError(f"label counts do not cross-foot for {event.value}")
        for attr in ("threads", "true", "false", "unverified", "articles"):
            if sum(getattr(r, attr) for r in self.per_event.values()) != getattr(self.total, attr):
                raise ValueError(f"per-event {attr} counts do not sum to the total")


def compute_stats(
    threads: Sequence[ThreadEntry],
    articles_by_thread: Mapping[str, Sequence] | None = None,
) -> CorpusStats:
    """Per-event thread/label/article counts with cross-footing enforced."""
    per_event: dict[Event, EventStats] = {}
    for event in Event:
        ts = [t for t in threads if t.event is event]
        if not ts:
            continue
        n_articles = sum(
            len(articles_by_thread.get(t.thread_id, ())) for t in ts
        ) if articles_by_thread else 0
        per_event[event] = EventStats(
            threads=len(ts),
            true=sum(1 for t in ts if t.label is Label.TRUE),
            false=sum(1 for t in ts if t.label is Label.FALSE),
            unverified=sum(1 for t in ts if t.label is Label.UNVERIFIED),
            articles=n_articles,
        )
    total = EventStats(
        threads=sum(r.threads for r in per_event.values()),
        true=sum(r.true for r in per_event.values()),
        false=sum(r.false for r in per_event.values()),
        unverified=sum(r.unverified for r in per_event.values()),
        articles=sum(r.articles for r in per_event.values()),
    )
    return CorpusStats(per_event=per_event, total=total)


def format_stats(stats: CorpusStats) -> str:
    header = f"{'Event':<20}{'Threads':>9}{'True':>7}{'False':>7}{'Unverified':>12}{'Articles':>10}"
    lines = [header, "-" * len(header)]
    for event, row in stats.per_event.items():
        lines.append(
            f"{EVENT_DISPLAY_NAMES[event]:<20}{row.threads:>9}{row.true:>7}"
            f"{row.false:>7}{row.unverified:>12}{row.articles:>10}"
        )
    lines.append("-" * len(header))
    t = stats.total
    lines.append(f"{'Total':<20}{t.threads:>9}{t.true:>7}{t.false:>7}{t.unverified:>12}{t.articles:>10}")
    return "\n".join(lines)


def assemble(
    threads: Sequence[ThreadEntry],
    evidence: Mapping[str, Sequence[ArticleDoc]],
    cfg: SelectionConfig,
    strategy: Strategy = Strategy.PREPROCESSED,
    triple_words: Mapping[str, set[str]] | None = None,
) -> tuple[list[EnrichedEntry], float]:
    """Join threads with their retrieved evidence and selected sentences.

    Entries that cannot fill the sentence quota are flagged incomplete, never
    dropped; the second return value is the fraction of complete entries.
    """
    entries: list[EnrichedEntry] = []
    complete_count = 0
    for thread in threads:
        articles = tuple(
            a for a in evidence.get(thread.thread_id, ())[:MAX_ARTICLES_PER_THREAD]
            if not a.is_empty
        )
        sentences: tuple[ScoredSentence, ...] = ()
        if articles:
            try:
                rumour = preprocess(thread.source)
            except EmptyTweet:
                rumour = None
            if rumour is not None:
                sentences = tuple(
                    select_sentences(rumour, articles, cfg, triple_words, allow_partial=True)
                )
        complete = len(sentences) == cfg.top_k
        complete_count += complete
        entries.append(
            EnrichedEntry(
                thread=thread,
                articles=articles,
                selected_sentences=sentences,
                strategy_used=strategy,
                complete=complete,
            )
        )
    ratio = complete_count / len(entries) if entries else 0.0
    return entries, ratio


def normalize_url(url: str) -> str:
    """Canonicalise a URL for overlap comparison.

    Lowercases scheme and host, strips a leading "www.", the fragment, any
    utm_* tracking parameters, and a trailing slash; path case is preserved.
    Idempotent by construction.
    """
    parts = urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise UnparseableUrl(url)
    host = parts.netloc.lower()
    if host.startswith("www."):
        host = host[4:]
    query = urlencode(
        [(k, v) for k, v in parse_qsl(parts.query, keep_blank_values=True)
         if not k.lower().startswith("utm_")]
    )
    path = parts.path.rstrip("/")
    return urlunsplit((parts.scheme.lower(), host, path, query, ""))


@dataclass(frozen=True)
class OverlapReport:
    web_overall: int
    web_unique: int
    thread_overall: int
    thread_unique: int
    overlap_overall: int
    overlap_unique: int
    web_overall_not_empty: int
    web_unique_not_empty: int
    thread_overall_not_empty: int
    thread_unique_not_empty: int

    def __post_init__(self):
        if self.web_unique > self.web_overall or self.thread_unique > self.thread_overall:
            raise ValueError("unique page counts cannot exceed overall counts")
        if self.overlap_unique > self.overlap_overall:
            raise ValueError("unique overlap cannot exceed co-occurrence overlap")


def _canonical(url: str) -> str:
    try:
        return normalize_url(url)
    except UnparseableUrl:
        return url.lower()


def overlap_report(
    entries: Sequence[EnrichedEntry],
    url_is_empty: Callable[[str], bool] | None = None,
) -> OverlapReport:
    """Measure how much web evidence coincides with thread-posted URLs.

    Overall counts are multiset sizes, unique counts canonical set sizes,
    and overlap is the canonical-set intersection — counted once per URL for
    the unique figure and as min-count co-occurrence for the overall one.
    `url_is_empty` resolves emptiness for thread URLs (unresolvable means
    empty); web articles carry their own emptiness flag.
    """
    web_urls = [a.url for e in entries for a in e.articles]
    web_empty = {a.url: a.is_empty for e in entries for a in e.articles}
    thread_urls = [u for e in entries for u in e.thread.reaction_urls]

    def counts(urls: list[str]) -> dict[str, int]:
        out: dict[str, int] = {}
        for u in urls:
            c = _canonical(u)
            out[c] = out.get(c, 0) + 1
        return out

    web_counts, thread_counts = counts(web_urls), counts(thread_urls)
    shared = set(web_counts) & set(thread_counts)
    resolve = url_is_empty or (lambda _u: True)
    web_not_empty = [u for u in web_urls if not web_empty[u]]
    thread_not_empty = [u for u in thread_urls if not resolve(u)]
    return OverlapReport(
        web_overall=len(web_urls),
        web_unique=len(web_counts),
        thread_overall=len(thread_urls),
        thread_unique=len(thread_counts),
        overlap_overall=sum(min(web_counts[u], thread_counts[u]) for u in shared),
        overlap_unique=len(shared),
        web_overall_not_empty=len(web_not_empty),
        web_unique_not_empty=len(counts(web_not_empty)),
        thread_overall_not_empty=len(thread_not_empty),
        thread_unique_not_empty=len(counts(thread_not_empty)),
    )


def _tweet_to_record(t: RawTweet) -> dict:
    return {
        "id": t.id,
        "text": t.text,
        "created_at": t.created_at.isoformat(),
        "event": t.event,
        "author_handle": t.author_handle,
    }


def _tweet_from_record(r: dict) -> RawTweet:
    return RawTweet(
        id=r["id"], text=r["text"], created_at=date.fromisoformat(r["created_at"]),
        event=r["event"], author_handle=r.get("author_handle", ""),
    )


def entry_to_record(e: EnrichedEntry) -> dict:
    return {
        "thread_id": e.thread.thread_id,
        "event": e.thread.event.value,
        "label": e.thread.label.value,
        "source": _tweet_to_record(e.thread.source),
        "reactions": [_tweet_to_record(r) for r in e.thread.reactions],
        "reaction_urls": list(e.thread.reaction_urls),
        "articles": [
            {
                "url": a.url,
                "title": a.title,
                "paragraphs": list(a.paragraphs),
                "rank": a.retrieved_rank,
                "fetch_date": a.fetch_date.isoformat(),
            }
            for a in e.articles
        ],
        "sentences": [
            {
                "text": s.text,
                "tokens": list(s.tokens),
                "source_url": s.source_url,
                "article_rank": s.article_rank,
                "position": s.position_in_article,
                "raw_overlap": s.raw_overlap,
                "score": s.final_score,
            }
            for s in e.selected_sentences
        ],
        "strategy": e.strategy_used.value,
        "complete": e.complete,
    }


def entry_from_record(r: dict) -> EnrichedEntry:
    thread = ThreadEntry(
        source=_tweet_from_record(r["source"]),
        reactions=tuple(_tweet_from_record(x) for x in r["reactions"]),
        reaction_urls=tuple(r["reaction_urls"]),
        label=Label(r["label"]),
        event=Event(r["event"]),
    )
    articles = tuple(
        make_article(
            a["url"], a["title"], a["paragraphs"], a["rank"],
            datetime.fromisoformat(a["fetch_date"]),
        )
        for a in r["articles"]
    )
    sentences = tuple(
        ScoredSentence(
            text=s["text"],
            tokens=tuple(s["tokens"]),
            source_url=s["source_url"],
            article_rank=s["article_rank"],
            position_in_article=s["position"],
            raw_overlap=s["raw_overlap"],
            final_score=s["score"],
        )
        for s in r["sentences"]
    )
    return EnrichedEntry(
        thread=thread,
        articles=articles,
        selected_sentences=sentences,
        strategy_used=Strategy(r["strategy"]),
        complete=r["complete"],
    )


def write_dataset(
    entries: Sequence[EnrichedEntry],
    path: str | Path,
    config_hash: str = "",
    seed: int | None = None,
) -> None:
    """Write versioned JSON Lines: one header line, then one entry per line."""
    header = {"schema_version": SCHEMA_VERSION, "config_hash": config_hash, "seed": seed}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
        for entry in entries:
            fh.write(
                json.dumps(entry_to_record(entry), sort_keys=True, ensure_ascii=False) + "\n"
            )


def read_dataset(path: str | Path) -> list[EnrichedEntry]:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise SchemaVersionMismatch(None, SCHEMA_VERSION)
    header = json.loads(lines[0])
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(header.get("schema_version"), SCHEMA_VERSION)
    return [entry_from_record(json.loads(line)) for line in lines[1:]]
