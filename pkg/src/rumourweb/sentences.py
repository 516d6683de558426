"""Evidence-sentence selection by triple-word overlap with length penalties."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import InsufficientEvidence
from .retrieval import ArticleDoc
from .text_prep import PreprocessedTweet
from .tokenizer import split_sentences, tokenize


@dataclass(frozen=True)
class SelectionConfig:
    min_len: int = 5
    max_len: int = 20
    penalty_per_word: float = 0.02
    top_k: int = 5
    stopwords: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not 0 < self.min_len < self.max_len:
            raise ValueError("need 0 < min_len < max_len")
        if not 0.0 <= self.penalty_per_word < 1.0:
            raise ValueError("penalty_per_word must be in [0, 1)")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class ScoredSentence:
    text: str
    tokens: tuple[str, ...]
    source_url: str
    article_rank: int
    position_in_article: int
    raw_overlap: int
    final_score: float

    def __post_init__(self):
        if self.raw_overlap < 0 or self.final_score < 0:
            raise ValueError("overlap and score must be non-negative")
        if self.final_score > self.raw_overlap + 1e-9:
            raise ValueError("final_score cannot exceed raw_overlap")


def sentence_key(url: str, position: int) -> str:
    """Stable id for an article sentence, used to key external triple files."""
    return f"{url}#{position}"


def length_adjusted_score(raw_overlap: int, n_tokens: int, cfg: SelectionConfig) -> float:
    """Apply the length rule: short sentences score 0, long ones lose
    penalty_per_word of their score per token over max_len (floored at 0)."""
    if n_tokens < cfg.min_len:
        return 0.0
    if n_tokens > cfg.max_len:
        factor = max(0.0, 1.0 - cfg.penalty_per_word * (n_tokens - cfg.max_len))
        return raw_overlap * factor
    return float(raw_overlap)


def iter_article_sentences(article: ArticleDoc):
    """Yield (position, sentence text, tokens) over an article's paragraphs."""
    position = 0
    for paragraph in article.paragraphs:
        for sentence in split_sentences(paragraph):
            yield position, sentence, tuple(tokenize(sentence))
            position += 1


def select_sentences(
    rumour: PreprocessedTweet,
    articles: Sequence[ArticleDoc],
    cfg: SelectionConfig,
    triple_words: Mapping[str, set[str]] | None = None,
    allow_partial: bool = False,
) -> list[ScoredSentence]:
    """Pick the top_k article sentences most likely to bear on the rumour.

    Each sentence's important words are the words of its extracted clause
    triples (keyed by sentence_key in `triple_words`) minus stopwords; with
    no triple file the non-stopword sentence tokens stand in. The raw score
    counts distinct important words, case-insensitively, that also appear in
    the rumour; the length rule then penalises or drops the sentence.

    Raises InsufficientEvidence when fewer than top_k sentences score above
    zero, unless allow_partial is set (the assembly pipeline flags those
    entries instead of dropping them).
    """
    rumour_types = {tok.lower() for tok in rumour.tokens}
    candidates: list[ScoredSentence] = []
    for article in sorted(articles, key=lambda a: a.retrieved_rank):
        for position, text, tokens in iter_article_sentences(article):
            if triple_words is not None:
                important = set(triple_words.get(sentence_key(article.url, position), ()))
                important = {w.lower() for w in important}
            else:
                important = {t.lower() for t in tokens if any(c.isalnum() for c in t)}
            important -= cfg.stopwords
            raw = len(important & rumour_types)
            final = length_adjusted_score(raw, len(tokens), cfg)
            if final <= 0.0:
                continue
            candidates.append(
                ScoredSentence(
                    text=text,
                    tokens=tokens,
                    source_url=article.url,
                    article_rank=article.retrieved_rank,
                    position_in_article=position,
                    raw_overlap=raw,
                    final_score=final,
                )
            )
    candidates.sort(
        key=lambda s: (-s.final_score, s.article_rank, s.position_in_article, s.source_url)
    )
    selected = candidates[: cfg.top_k]
    if len(selected) < cfg.top_k and not allow_partial:
        raise InsufficientEvidence(cfg.top_k, selected)
    return selected
