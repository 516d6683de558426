import json
from datetime import date
from pathlib import Path

import pytest

from rumourweb.config import RunConfig, data_path
from rumourweb.retrieval import OfflineCorpusIndex
from rumourweb.text_prep import RawTweet, SegmentationDictionary, load_stopwords, preprocess

DATA_DIR = Path(__file__).parent / "data"

CH_TWEET_ID = "552780001"
CH_TWEET_TEXT = (
    "MORE: Massacre suspects believed to have taken hostage and holed up in "
    "small industrial town northeast of Paris: http://t.co/5AZzL9q19K #CharlieHebdo"
)


@pytest.fixture(scope="session")
def dictionary() -> SegmentationDictionary:
    return SegmentationDictionary.from_file(data_path("unigram_counts.txt"))


@pytest.fixture(scope="session")
def stopwords() -> frozenset[str]:
    return load_stopwords(data_path("stopwords.txt"))


@pytest.fixture(scope="session")
def ch_tweet() -> RawTweet:
    return RawTweet(
        id=CH_TWEET_ID,
        text=CH_TWEET_TEXT,
        created_at=date(2015, 1, 9),
        event="charliehebdo",
    )


@pytest.fixture(scope="session")
def ch_preprocessed(ch_tweet):
    return preprocess(ch_tweet)


@pytest.fixture(scope="session")
def conllu_path() -> Path:
    return DATA_DIR / "charlie_hebdo.conllu"


@pytest.fixture(scope="session")
def triples_path() -> Path:
    return DATA_DIR / "charlie_hebdo_triples.tsv"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return DATA_DIR / "corpus"


@pytest.fixture(scope="session")
def offline_corpus_path() -> Path:
    return DATA_DIR / "offline_corpus.jsonl"


@pytest.fixture(scope="session")
def offline_index(offline_corpus_path) -> OfflineCorpusIndex:
    return OfflineCorpusIndex.from_jsonl(offline_corpus_path)


@pytest.fixture()
def make_index(tmp_path):
    """Build a throwaway offline index from in-test document dicts."""

    def _make(docs: list[dict]) -> OfflineCorpusIndex:
        path = tmp_path / "corpus.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for doc in docs:
                fh.write(json.dumps(doc) + "\n")
        return OfflineCorpusIndex.from_jsonl(path)

    return _make


@pytest.fixture(scope="session")
def service_client(offline_corpus_path):
    from fastapi.testclient import TestClient

    from rumourweb.service import create_app

    config = RunConfig(backend=f"offline:{offline_corpus_path}")
    with TestClient(create_app(config), raise_server_exceptions=False) as client:
        yield client
