"""FastAPI service exposing the pipeline operations over HTTP.

The service loads its read-only resources (segmentation dictionary, stopword
list, embedding stores, and the offline corpus index when configured) once at
startup; request payloads carry the per-item data. The CLI is a thin client
of these endpoints.
"""

from __future__ import annotations

import logging
from datetime import date, datetime
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import dataset as ds
from . import evaluation as ev
from .config import RunConfig
from .errors import (
    BackendUnavailable,
    ConfigError,
    EmptyQueryBody,
    EmptyTweet,
    MalformedParse,
    MalformedTweet,
    MissingAnnotation,
    MissingEvent,
    QuotaExceeded,
    RumourWebError,
    ScorerUnavailable,
    SpanNotFound,
    UnparseableUrl,
)
from .parse_ingest import ParsedSentence, parse_conllu, parse_triple_words, parse_triples
from .query_builder import Query, Strategy, build_query, render
from .relevance import (
    EmbeddingStore,
    EvidenceBundle,
    SubprocessScorer,
    compare_strategies,
    url_words,
)
from .retrieval import (
    ArticleDoc,
    LiveSearchBackend,
    OfflineCorpusIndex,
    OfflineSearchBackend,
    extract_article,
    make_article,
    search,
)
from .sentences import SelectionConfig, select_sentences
from .text_prep import (
    PreprocessedTweet,
    RawTweet,
    SegmentationDictionary,
    load_stopwords,
    preprocess,
    segment_hashtag,
)

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR = {
    EmptyTweet: 400,
    EmptyQueryBody: 400,
    MalformedParse: 400,
    MalformedTweet: 400,
    MissingAnnotation: 400,
    SpanNotFound: 400,
    UnparseableUrl: 400,
    MissingEvent: 400,
    ConfigError: 400,
    QuotaExceeded: 429,
    BackendUnavailable: 503,
    ScorerUnavailable: 503,
}


# ---------------------------------------------------------------------------
# Request / response models


class TweetIn(BaseModel):
    id: str
    text: str
    created_at: date
    event: str = ""
    author_handle: str = ""

    def to_domain(self) -> RawTweet:
        return RawTweet(
            id=self.id, text=self.text, created_at=self.created_at,
            event=self.event, author_handle=self.author_handle,
        )


class PreprocessedModel(BaseModel):
    source_id: str
    tokens: list[str]
    extracted_urls: list[str] = []
    trailing_hashtags: list[str] = []
    inner_hashtag_tokens: list[int] = []
    date_cutoff: date
    removed_mentions: list[str] = []

    @classmethod
    def from_domain(cls, t: PreprocessedTweet) -> "PreprocessedModel":
        return cls(
            source_id=t.source_id, tokens=list(t.tokens),
            extracted_urls=list(t.extracted_urls),
            trailing_hashtags=list(t.trailing_hashtags),
            inner_hashtag_tokens=list(t.inner_hashtag_tokens),
            date_cutoff=t.date_cutoff, removed_mentions=list(t.removed_mentions),
        )

    def to_domain(self) -> PreprocessedTweet:
        return PreprocessedTweet(
            source_id=self.source_id, tokens=tuple(self.tokens),
            extracted_urls=tuple(self.extracted_urls),
            trailing_hashtags=tuple(self.trailing_hashtags),
            inner_hashtag_tokens=tuple(self.inner_hashtag_tokens),
            date_cutoff=self.date_cutoff, removed_mentions=tuple(self.removed_mentions),
        )


class PreprocessRequest(BaseModel):
    tweets: list[TweetIn]


class PreprocessFailure(BaseModel):
    id: str
    error: str


class PreprocessResponse(BaseModel):
    tweets: list[PreprocessedModel]
    failures: list[PreprocessFailure] = []


class SegmentRequest(BaseModel):
    tag: str


class SegmentResponse(BaseModel):
    words: list[str]


class RawThreadIn(BaseModel):
    """One thread folder's raw records, exactly as read from disk."""

    event: str
    thread_id: str
    source: dict
    reactions: list[dict] = []
    annotation: dict


class ThreadModel(BaseModel):
    thread_id: str
    event: str
    label: str
    source: TweetIn
    reactions: list[TweetIn] = []
    reaction_urls: list[str] = []
    preprocessed: Optional[PreprocessedModel] = None
    error: Optional[str] = None

    @classmethod
    def from_domain(cls, t: ds.ThreadEntry, pre: PreprocessedTweet | None, error: str | None):
        return cls(
            thread_id=t.thread_id,
            event=t.event.value,
            label=t.label.value,
            source=TweetIn(
                id=t.source.id, text=t.source.text, created_at=t.source.created_at,
                event=t.source.event, author_handle=t.source.author_handle,
            ),
            reactions=[
                TweetIn(id=r.id, text=r.text, created_at=r.created_at,
                        event=r.event, author_handle=r.author_handle)
                for r in t.reactions
            ],
            reaction_urls=list(t.reaction_urls),
            preprocessed=PreprocessedModel.from_domain(pre) if pre else None,
            error=error,
        )

    def to_domain(self) -> ds.ThreadEntry:
        return ds.ThreadEntry(
            source=self.source.to_domain(),
            reactions=tuple(r.to_domain() for r in self.reactions),
            reaction_urls=tuple(self.reaction_urls),
            label=ds.Label(self.label),
            event=ds.Event(self.event),
        )


class CorpusParseRequest(BaseModel):
    threads: list[RawThreadIn]


class CorpusParseResponse(BaseModel):
    threads: list[ThreadModel]


class QueryModel(BaseModel):
    source_id: str
    strategy: Strategy
    date_cutoff: date
    body_tokens: list[str]
    or_group: list[list[str]] = []
    rendered: str

    def to_domain(self) -> Query:
        return Query(
            strategy=self.strategy, date_cutoff=self.date_cutoff,
            body_tokens=tuple(self.body_tokens),
            or_group=tuple(tuple(g) for g in self.or_group),
        )


class BuildQueriesRequest(BaseModel):
    tweets: list[PreprocessedModel]
    strategy: Strategy
    conllu: Optional[str] = None
    triples_tsv: Optional[str] = None


class QueryFailure(BaseModel):
    source_id: str
    error: str


class BuildQueriesResponse(BaseModel):
    queries: list[QueryModel]
    failures: list[QueryFailure] = []


class ArticleModel(BaseModel):
    url: str
    title: str = ""
    paragraphs: list[str] = []
    rank: int = 0
    fetch_date: Optional[datetime] = None
    is_empty: bool = False

    @classmethod
    def from_domain(cls, a: ArticleDoc) -> "ArticleModel":
        return cls(
            url=a.url, title=a.title, paragraphs=list(a.paragraphs),
            rank=a.retrieved_rank, fetch_date=a.fetch_date, is_empty=a.is_empty,
        )

    def to_domain(self) -> ArticleDoc:
        return make_article(self.url, self.title, self.paragraphs, self.rank, self.fetch_date)


class SearchRequest(BaseModel):
    queries: list[QueryModel]
    want: int = Field(default=5, ge=1)


class SearchResultOut(BaseModel):
    source_id: str
    articles: list[ArticleModel]


class SearchResponse(BaseModel):
    results: list[SearchResultOut]


class ExtractRequest(BaseModel):
    url: str
    blob: str


class UrlWordsResponse(BaseModel):
    words: list[str]


class SentenceModel(BaseModel):
    text: str
    tokens: list[str]
    source_url: str
    article_rank: int
    position: int
    raw_overlap: int
    score: float

    @classmethod
    def from_domain(cls, s) -> "SentenceModel":
        return cls(
            text=s.text, tokens=list(s.tokens), source_url=s.source_url,
            article_rank=s.article_rank, position=s.position_in_article,
            raw_overlap=s.raw_overlap, score=s.final_score,
        )


class SelectItem(BaseModel):
    rumour: PreprocessedModel
    articles: list[ArticleModel]


class SelectRequest(BaseModel):
    items: list[SelectItem]
    triples_tsv: Optional[str] = None
    top_k: Optional[int] = None


class SelectItemOut(BaseModel):
    source_id: str
    sentences: list[SentenceModel]
    complete: bool


class SelectResponse(BaseModel):
    items: list[SelectItemOut]


class AssembleRequest(BaseModel):
    threads: list[ThreadModel]
    articles: dict[str, list[ArticleModel]]
    strategy: Strategy = Strategy.PREPROCESSED
    triples_tsv: Optional[str] = None
    top_k: Optional[int] = None


class AssembleResponse(BaseModel):
    entries: list[dict]
    completeness_ratio: float


class EntriesRequest(BaseModel):
    entries: list[dict]


class StatsRequest(BaseModel):
    threads: Optional[list[ThreadModel]] = None
    entries: Optional[list[dict]] = None


class EventStatsOut(BaseModel):
    event: str
    threads: int
    true: int
    false: int
    unverified: int
    articles: int


class StatsResponse(BaseModel):
    per_event: list[EventStatsOut]
    total: EventStatsOut
    table: str


class OverlapResponse(BaseModel):
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


class MetricBundleIn(BaseModel):
    rumour: PreprocessedModel
    response_urls: list[str] = []
    articles: list[ArticleModel] = []


class ScoreRequest(BaseModel):
    evidence: dict[Strategy, list[MetricBundleIn]]
    use_external_scorer: bool = False


class MetricReportOut(BaseModel):
    strategy: Strategy
    url_words_score: float
    paragraph_embed_score: float
    external_score: Optional[float] = None
    n_articles: int


class ScoreResponse(BaseModel):
    reports: list[MetricReportOut]
    rankings: dict[str, list[Strategy]]


class PredictionIn(BaseModel):
    thread_id: str
    pair_index: int
    predicted_label: str
    fold: str

    def to_domain(self) -> ev.PredictionRecord:
        return ev.PredictionRecord(
            thread_id=self.thread_id, pair_index=self.pair_index,
            predicted_label=ds.Label(self.predicted_label), fold=ds.Event(self.fold),
        )


class EvaluateRequest(BaseModel):
    entries: list[dict]
    predictions: Optional[list[PredictionIn]] = None
    scenario: ev.Scenario = ev.Scenario.RUMOUR_PLUS_EVIDENCE


class EvalReportOut(BaseModel):
    per_event_f1: dict[str, float]
    per_class_f1: dict[str, float]
    macro_f1: float
    confusion: list[list[int]]
    table: str
    predictions: list[PredictionIn] = []


class HealthResponse(BaseModel):
    status: str
    name: str
    version: str
    backend: str
    corpus_size: int


# ---------------------------------------------------------------------------
# Application state and factory


class AppState:
    """Resources loaded once from the run configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.dictionary = SegmentationDictionary.from_file(config.dictionary_path)
        self.stopwords = load_stopwords(config.stopword_path)
        self.url_store = EmbeddingStore.from_text_file(config.url_embeddings_path)
        if config.paragraph_embeddings_path == config.url_embeddings_path:
            self.paragraph_store = self.url_store
        else:
            self.paragraph_store = EmbeddingStore.from_text_file(config.paragraph_embeddings_path)
        self.index: OfflineCorpusIndex | None = None
        corpus = config.offline_corpus_path
        if corpus:
            self.index = OfflineCorpusIndex.from_jsonl(corpus)

    def backend(self):
        if self.index is not None:
            return OfflineSearchBackend(self.index)
        if self.config.backend == "live":
            return LiveSearchBackend(requests_per_second=self.config.rate_limit)
        raise BackendUnavailable("no search backend configured (set backend in the config)")

    def selection_config(self, top_k: int | None = None) -> SelectionConfig:
        c = self.config
        return SelectionConfig(
            min_len=c.min_len, max_len=c.max_len, penalty_per_word=c.penalty_per_word,
            top_k=top_k or c.top_k, stopwords=self.stopwords,
        )

    def scorer(self):
        if not self.config.scorer_command:
            raise ScorerUnavailable("no external scorer command configured")
        return SubprocessScorer(self.config.scorer_command.split())


def _triple_words_from_text(text: str | None):
    if not text:
        return None
    return parse_triple_words(text.splitlines())


def _parses_from_text(text: str | None) -> dict[str, ParsedSentence]:
    if not text:
        return {}
    return parse_conllu(text.splitlines())


def create_app(config: RunConfig | None = None) -> FastAPI:
    config = config or RunConfig()
    state = AppState(config)
    app = FastAPI(title="rumourweb", version="0.1.0")
    app.state.resources = state

    @app.exception_handler(RumourWebError)
    async def _domain_error(request: Request, exc: RumourWebError):
        status = _STATUS_BY_ERROR.get(type(exc), 422)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            status="ok", name="rumourweb", version="0.1.0",
            backend=config.backend or "none",
            corpus_size=len(state.index) if state.index else 0,
        )

    @app.post("/api/preprocess", response_model=PreprocessResponse)
    def preprocess_tweets(req: PreprocessRequest):
        out, failures = [], []
        for tweet in req.tweets:
            try:
                out.append(PreprocessedModel.from_domain(preprocess(tweet.to_domain())))
            except EmptyTweet as exc:
                failures.append(PreprocessFailure(id=tweet.id, error=str(exc)))
        return PreprocessResponse(tweets=out, failures=failures)

    @app.post("/api/segment", response_model=SegmentResponse)
    def segment(req: SegmentRequest):
        return SegmentResponse(words=segment_hashtag(req.tag, state.dictionary))

    @app.post("/api/corpus/parse", response_model=CorpusParseResponse)
    def corpus_parse(req: CorpusParseRequest):
        threads = []
        for raw in req.threads:
            entry = ds.thread_from_raw_records(
                raw.event, raw.thread_id, raw.source, raw.reactions, raw.annotation
            )
            pre, err = None, None
            try:
                pre = preprocess(entry.source)
            except EmptyTweet as exc:
                err = str(exc)
            threads.append(ThreadModel.from_domain(entry, pre, err))
        return CorpusParseResponse(threads=threads)

    @app.post("/api/queries/build", response_model=BuildQueriesResponse)
    def queries_build(req: BuildQueriesRequest):
        parses = _parses_from_text(req.conllu)
        triples = {}
        if req.triples_tsv:
            triples = parse_triples(req.triples_tsv.splitlines(), parses)
        queries, failures = [], []
        for tweet in req.tweets:
            t = tweet.to_domain()
            try:
                q = build_query(
                    t, req.strategy, state.dictionary,
                    parse=parses.get(t.source_id),
                    triples=triples.get(t.source_id),
                )
                queries.append(
                    QueryModel(
                        source_id=t.source_id, strategy=q.strategy,
                        date_cutoff=q.date_cutoff, body_tokens=list(q.body_tokens),
                        or_group=[list(g) for g in q.or_group], rendered=render(q),
                    )
                )
            except (EmptyQueryBody, ValueError) as exc:
                failures.append(QueryFailure(source_id=t.source_id, error=str(exc)))
        return BuildQueriesResponse(queries=queries, failures=failures)

    @app.post("/api/search", response_model=SearchResponse)
    def run_search(req: SearchRequest):
        backend = state.backend()
        # bounded parallel fetches only make sense against the live backend
        fan_out = config.max_in_flight if backend.name == "live" else 1
        results = []
        for qm in req.queries:
            docs = search(qm.to_domain(), backend, want=req.want, max_in_flight=fan_out)
            results.append(
                SearchResultOut(
                    source_id=qm.source_id,
                    articles=[ArticleModel.from_domain(d) for d in docs],
                )
            )
        return SearchResponse(results=results)

    @app.post("/api/articles/extract", response_model=ArticleModel)
    def article_extract(req: ExtractRequest):
        return ArticleModel.from_domain(extract_article(req.blob, req.url))

    @app.get("/api/url-words", response_model=UrlWordsResponse)
    def url_words_endpoint(url: str):
        return UrlWordsResponse(words=url_words(url, state.dictionary, state.stopwords))

    @app.post("/api/sentences/select", response_model=SelectResponse)
    def sentences_select(req: SelectRequest):
        cfg = state.selection_config(req.top_k)
        triple_words = _triple_words_from_text(req.triples_tsv)
        items = []
        for item in req.items:
            rumour = item.rumour.to_domain()
            articles = [a.to_domain() for a in item.articles]
            sentences = select_sentences(
                rumour, articles, cfg, triple_words, allow_partial=True
            )
            items.append(
                SelectItemOut(
                    source_id=rumour.source_id,
                    sentences=[SentenceModel.from_domain(s) for s in sentences],
                    complete=len(sentences) == cfg.top_k,
                )
            )
        return SelectResponse(items=items)

    @app.post("/api/dataset/assemble", response_model=AssembleResponse)
    def dataset_assemble(req: AssembleRequest):
        threads = [t.to_domain() for t in req.threads]
        evidence = {
            tid: [a.to_domain() for a in arts] for tid, arts in req.articles.items()
        }
        cfg = state.selection_config(req.top_k)
        entries, ratio = ds.assemble(
            threads, evidence, cfg, req.strategy,
            _triple_words_from_text(req.triples_tsv),
        )
        return AssembleResponse(
            entries=[ds.entry_to_record(e) for e in entries], completeness_ratio=ratio
        )

    @app.post("/api/dataset/stats", response_model=StatsResponse)
    def dataset_stats(req: StatsRequest):
        if req.entries is not None:
            entries = [ds.entry_from_record(r) for r in req.entries]
            threads = [e.thread for e in entries]
            articles = {e.thread.thread_id: e.articles for e in entries}
        elif req.threads is not None:
            threads = [t.to_domain() for t in req.threads]
            articles = None
        else:
            raise ConfigError("stats needs either threads or entries")
        stats = ds.compute_stats(threads, articles)
        rows = [
            EventStatsOut(
                event=event.value, threads=row.threads, true=row.true,
                false=row.false, unverified=row.unverified, articles=row.articles,
            )
            for event, row in stats.per_event.items()
        ]
        total = stats.total
        return StatsResponse(
            per_event=rows,
            total=EventStatsOut(
                event="total", threads=total.threads, true=total.true,
                false=total.false, unverified=total.unverified, articles=total.articles,
            ),
            table=ds.format_stats(stats),
        )

    @app.post("/api/dataset/overlap", response_model=OverlapResponse)
    def dataset_overlap(req: EntriesRequest):
        entries = [ds.entry_from_record(r) for r in req.entries]
        known_empty: dict[str, bool] = {}
        if state.index is not None:
            for doc in state.index.docs:
                known_empty[doc.url] = (not doc.title) or (not doc.paragraphs)
        report = ds.overlap_report(entries, lambda u: known_empty.get(u, True))
        return OverlapResponse(**report.__dict__)

    @app.post("/api/metrics/score", response_model=ScoreResponse)
    def metrics_score(req: ScoreRequest):
        evidence = {
            strategy: [
                EvidenceBundle(
                    rumour=b.rumour.to_domain(),
                    response_urls=tuple(b.response_urls),
                    articles=tuple(a.to_domain() for a in b.articles),
                )
                for b in bundles
            ]
            for strategy, bundles in req.evidence.items()
        }
        scorer = state.scorer() if req.use_external_scorer else None
        try:
            reports, rankings = compare_strategies(
                evidence, state.url_store, state.paragraph_store,
                state.dictionary, state.stopwords, scorer,
            )
        finally:
            if scorer is not None:
                scorer.close()
        return ScoreResponse(
            reports=[
                MetricReportOut(
                    strategy=r.strategy, url_words_score=r.url_words_score,
                    paragraph_embed_score=r.paragraph_embed_score,
                    external_score=r.external_score, n_articles=r.n_articles,
                )
                for r in reports
            ],
            rankings=rankings,
        )

    @app.post("/api/evaluate", response_model=EvalReportOut)
    def evaluate(req: EvaluateRequest):
        entries = [ds.entry_from_record(r) for r in req.entries]
        predictions_out: list[PredictionIn] = []
        if req.predictions is None:
            report, records = ev.run_loocv(entries, req.scenario)
            predictions_out = [
                PredictionIn(
                    thread_id=r.thread_id, pair_index=r.pair_index,
                    predicted_label=r.predicted_label.value, fold=r.fold.value,
                )
                for r in records
            ]
        else:
            report = ev.aggregate_predictions(
                entries, [p.to_domain() for p in req.predictions]
            )
        return EvalReportOut(
            per_event_f1={e.value: v for e, v in report.per_event_f1.items()},
            per_class_f1={l.value: v for l, v in report.per_class_f1.items()},
            macro_f1=report.macro_f1,
            confusion=[list(row) for row in report.confusion],
            table=ev.format_report(report),
            predictions=predictions_out,
        )

    return app


def app_factory() -> FastAPI:
    """Uvicorn factory entry point honouring RUMOURWEB_CONFIG."""
    import os

    from .config import load_config

    path = os.environ.get("RUMOURWEB_CONFIG")
    return create_app(load_config(path) if path else RunConfig())
