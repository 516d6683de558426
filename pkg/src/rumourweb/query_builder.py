"""Search-query construction and rendering for the three shortening strategies."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from enum import Enum

from .errors import EmptyQueryBody
from .parse_ingest import DEFAULT_RETAIN_RELS, ParsedSentence, Triple, extract_triples, retain_by_deprel
from .text_prep import PreprocessedTweet, SegmentationDictionary, segment_hashtag


class Strategy(str, Enum):
    PREPROCESSED = "preprocessed"
    DEPREL = "deprel"
    TRIPLE = "triple"


@dataclass(frozen=True)
class Query:
    """A date-restricted search request ready for rendering."""

    strategy: Strategy
    date_cutoff: date
    body_tokens: tuple[str, ...]
    or_group: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if not self.body_tokens:
            raise EmptyQueryBody("query body has no tokens")
        for group in self.or_group:
            for word in group:
                if "#" in word:
                    raise ValueError("or-group words must not contain '#'")


def build_query(
    t: PreprocessedTweet,
    strategy: Strategy,
    dictionary: SegmentationDictionary,
    parse: ParsedSentence | None = None,
    triples: list[Triple] | None = None,
    relset: frozenset[str] = DEFAULT_RETAIN_RELS,
) -> Query:
    """Build a query from a preprocessed tweet under the given strategy.

    The full-text strategy uses every token and drops the hashtag OR-group;
    the shortened strategies keep either the configured dependency relations
    or the union of clause-triple tokens, and attach the segmented trailing
    hashtags as an OR-group. Raises EmptyQueryBody when shortening removes
    everything.
    """
    if strategy is Strategy.PREPROCESSED:
        body = t.tokens
        or_group: tuple[tuple[str, ...], ...] = ()
    elif strategy is Strategy.DEPREL:
        if parse is None:
            raise ValueError("the deprel strategy requires a dependency parse")
        body = tuple(tok.surface for tok in retain_by_deprel(parse, relset))
        or_group = _segmented_tags(t, dictionary)
    elif strategy is Strategy.TRIPLE:
        if triples is None:
            if parse is None:
                raise ValueError("the triple strategy requires triples or a parse")
            triples = extract_triples(parse)
        if parse is None:
            raise ValueError("the triple strategy requires the parse for surfaces")
        indices: set[int] = set()
        for tr in triples:
            indices |= tr.all_indices()
        body = tuple(parse.surfaces(sorted(indices)))
        or_group = _segmented_tags(t, dictionary)
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown strategy {strategy!r}")

    if not body:
        raise EmptyQueryBody(f"strategy {strategy.value} removed every token of {t.source_id}")
    return Query(
        strategy=strategy, date_cutoff=t.date_cutoff, body_tokens=body, or_group=or_group
    )


def _segmented_tags(
    t: PreprocessedTweet, dictionary: SegmentationDictionary
) -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(segment_hashtag(tag, dictionary)) for tag in t.trailing_hashtags)


def render(q: Query) -> str:
    """Render a query to its wire string: before:DATE [(or words)] body."""
    parts = [f"before:{q.date_cutoff.isoformat()}"]
    or_words = [w for group in q.or_group for w in group]
    if or_words:
        parts.append("(" + " ".join(or_words) + ")")
    parts.extend(q.body_tokens)
    return " ".join(parts)
