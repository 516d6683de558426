from datetime import date

import pytest

from rumourweb.errors import EmptyQueryBody
from rumourweb.parse_ingest import read_parses, read_triples
from rumourweb.query_builder import Query, Strategy, build_query, render
from rumourweb.text_prep import PreprocessedTweet

CH_ID = "552780001"

EXPECTED = {
    Strategy.PREPROCESSED: (
        "before:2015-01-09 MORE : Massacre suspects believed to have taken "
        "hostage and holed up in small industrial town northeast of Paris :"
    ),
    Strategy.DEPREL: (
        "before:2015-01-09 (Charlie Hebdo) Massacre suspects small industrial "
        "town northeast"
    ),
    Strategy.TRIPLE: (
        "before:2015-01-09 (Charlie Hebdo) Massacre suspects believed to have "
        "taken hostage holed up in small industrial town northeast of Paris"
    ),
}


@pytest.fixture(scope="module")
def parse(conllu_path):
    return read_parses(conllu_path)[CH_ID]


@pytest.fixture(scope="module")
def triples(conllu_path, triples_path):
    return read_triples(triples_path, read_parses(conllu_path))[CH_ID]


class TestFixtureStrings:
    def test_preprocessed_render(self, ch_preprocessed, dictionary):
        q = build_query(ch_preprocessed, Strategy.PREPROCESSED, dictionary)
        assert render(q) == EXPECTED[Strategy.PREPROCESSED]
        assert q.or_group == ()

    def test_deprel_render(self, ch_preprocessed, dictionary, parse):
        q = build_query(ch_preprocessed, Strategy.DEPREL, dictionary, parse=parse)
        assert render(q) == EXPECTED[Strategy.DEPREL]
        assert q.or_group == (("Charlie", "Hebdo"),)

    def test_triple_render_from_file(self, ch_preprocessed, dictionary, parse, triples):
        q = build_query(ch_preprocessed, Strategy.TRIPLE, dictionary, parse=parse, triples=triples)
        assert render(q) == EXPECTED[Strategy.TRIPLE]

    def test_triple_render_from_builtin_extractor(self, ch_preprocessed, dictionary, parse):
        q = build_query(ch_preprocessed, Strategy.TRIPLE, dictionary, parse=parse)
        assert render(q) == EXPECTED[Strategy.TRIPLE]


class TestBuildQuery:
    def test_shortened_body_is_subsequence_of_full_body(self, ch_preprocessed, dictionary, parse):
        full = build_query(ch_preprocessed, Strategy.PREPROCESSED, dictionary).body_tokens
        short = build_query(ch_preprocessed, Strategy.DEPREL, dictionary, parse=parse).body_tokens
        it = iter(full)
        assert all(tok in it for tok in short)

    def test_shortening_everything_away_raises(self, dictionary, parse):
        t = PreprocessedTweet(
            source_id=CH_ID, tokens=("only", "words"), date_cutoff=date(2015, 1, 9)
        )
        with pytest.raises(EmptyQueryBody):
            build_query(t, Strategy.DEPREL, dictionary, parse=_no_hits(parse))

    def test_deprel_requires_parse(self, ch_preprocessed, dictionary):
        with pytest.raises(ValueError):
            build_query(ch_preprocessed, Strategy.DEPREL, dictionary)


def _no_hits(parse):
    # relabel every token so no relation survives shortening
    from rumourweb.parse_ingest import ParsedSentence, ParseToken

    return ParsedSentence(
        sentence_id=parse.sentence_id,
        tokens=tuple(
            ParseToken(index=t.index, surface=t.surface, lemma=t.lemma, upos=t.upos,
                       head=t.head, deprel="dep" if t.head else "root")
            for t in parse.tokens
        ),
    )


class TestRender:
    def test_minimal_render(self):
        q = Query(
            strategy=Strategy.PREPROCESSED, date_cutoff=date(2015, 1, 1),
            body_tokens=("a", "b"),
        )
        assert render(q) == "before:2015-01-01 a b"

    def test_always_starts_with_iso_date(self, ch_preprocessed, dictionary):
        q = build_query(ch_preprocessed, Strategy.PREPROCESSED, dictionary)
        prefix, _, _ = render(q).partition(" ")
        assert prefix == "before:2015-01-09"
        date.fromisoformat(prefix.removeprefix("before:"))

    def test_no_trailing_whitespace(self, ch_preprocessed, dictionary):
        rendered = render(build_query(ch_preprocessed, Strategy.PREPROCESSED, dictionary))
        assert rendered == rendered.strip()

    def test_empty_body_rejected(self):
        with pytest.raises(EmptyQueryBody):
            Query(strategy=Strategy.PREPROCESSED, date_cutoff=date(2015, 1, 1), body_tokens=())

    def test_hash_in_or_group_rejected(self):
        with pytest.raises(ValueError):
            Query(
                strategy=Strategy.DEPREL, date_cutoff=date(2015, 1, 1),
                body_tokens=("a",), or_group=(("#bad",),),
            )
