"""rumourweb: evidence retrieval and veracity evaluation for rumour threads."""

__version__ = "0.1.0"

from .dataset import EnrichedEntry, Event, Label, ThreadEntry
from .query_builder import Query, Strategy, build_query, render
from .retrieval import ArticleDoc, OfflineCorpusIndex, search
from .sentences import ScoredSentence, SelectionConfig, select_sentences
from .text_prep import PreprocessedTweet, RawTweet, SegmentationDictionary, preprocess, segment_hashtag

__all__ = [
    "ArticleDoc",
    "EnrichedEntry",
    "Event",
    "Label",
    "OfflineCorpusIndex",
    "PreprocessedTweet",
    "Query",
    "RawTweet",
    "ScoredSentence",
    "SegmentationDictionary",
    "SelectionConfig",
    "Strategy",
    "ThreadEntry",
    "build_query",
    "preprocess",
    "render",
    "search",
    "segment_hashtag",
    "select_sentences",
]
