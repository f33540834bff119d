from __future__ import annotations

import io

import pytest

from lexeval.levels import PUNCT, STOPWORD
from lexeval.textproc import (
    CONTENT,
    PUNCTUATION,
    STOPWORD_CLASS,
    AnalyzerError,
    GoldFormatError,
    RuleAnalyzer,
    analyze,
    check_gold_consistency,
    classify,
    format_gold,
    load_stopwords,
    map_pos,
    parse_gold,
    read_gold,
    write_gold,
)


@pytest.fixture(scope="module")
def analyzer(lexicon):
    return RuleAnalyzer(lexicon.pos_vocabulary())


def test_work_is_a_content_verb(analyzer):
    doc = analyze("They work with the police.", analyzer)
    work = doc.sentences[0][1]
    assert (work.surface, work.lemma, work.pos, work.klass) == ("work", "work", "verb", CONTENT)
    assert doc.sentences[0][0].klass == STOPWORD_CLASS
    assert doc.sentences[0][-1].klass == PUNCTUATION


def test_empty_text_gives_no_sentences(analyzer):
    doc = analyze("", analyzer)
    assert doc.sentences == []
    assert doc.token_count == 0


def test_across_is_a_stopword(analyzer):
    doc = analyze("Across the road.", analyzer)
    assert doc.sentences[0][0].klass == STOPWORD_CLASS
    assert {"across", "among", "away"} <= load_stopwords()


@pytest.mark.parametrize("surface, klass", [(",", PUNCTUATION), ("the", STOPWORD_CLASS), ("police", CONTENT), ("--", PUNCTUATION), ("The", STOPWORD_CLASS)])
def test_classify(surface, klass):
    assert classify(surface) == klass


def test_spans_match_surfaces(analyzer):
    text = "I don't like it.  She took off early! Did they?"
    doc = analyze(text, analyzer)
    assert len(doc.sentences) == 3
    for _, _, tok in doc.tokens():
        assert text[tok.char_span[0]:tok.char_span[1]] == tok.surface
    took = [t for t in doc.sentences[1] if t.surface == "took"][0]
    assert took.lemma == "take"


def test_inflections_lemmatize(analyzer):
    doc = analyze("The organizations operated services.", analyzer)
    lemmas = [t.lemma for t in doc.sentences[0]]
    assert lemmas[:4] == ["the", "organization", "operate", "service"]


def test_analyzer_failure_carries_doc_id():
    class Broken:
        name = "broken"

        def analyze(self, text):
            raise RuntimeError("boom")

    with pytest.raises(AnalyzerError, match="doc-7"):
        analyze("x", Broken(), doc_id="doc-7")


def test_pos_mapping_table():
    assert map_pos("NOUN") == "noun"
    assert map_pos("VERB") == "verb"
    assert map_pos("PUNCT") == "other"


def test_read_gold_rows(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("# doc_id = d\nthe\tthe\tdeterminer\tS\nwork\twork\tverb\tA1\n")
    doc = read_gold(path)
    assert doc.doc_id == "d"
    assert doc.gold_labels == [["S", "A1"]]
    assert doc.sentences[0][1].surface == "work"
    assert doc.sentences[0][0].klass == STOPWORD_CLASS


def test_invalid_label_rejected():
    with pytest.raises(GoldFormatError, match="X1"):
        parse_gold(io.StringIO("work\twork\tverb\tX1\n"))


def test_column_count_mismatch_rejected():
    with pytest.raises(GoldFormatError, match="4 tab-separated"):
        parse_gold(io.StringIO("work\twork\tA1\n"))


def test_gold_round_trip(gold_docs, tmp_path):
    for doc in gold_docs:
        path = tmp_path / f"{doc.doc_id}.tsv"
        write_gold(doc, path)
        assert read_gold(path) == doc
    assert parse_gold(io.StringIO(format_gold(gold_docs))) == gold_docs


def test_bundled_gold_is_consistent(gold_docs):
    for doc in gold_docs:
        assert check_gold_consistency(doc) == []
        for si, ti, tok in doc.tokens():
            label = doc.gold_labels[si][ti]
            assert (label == STOPWORD) == (tok.klass == STOPWORD_CLASS)
            assert (label == PUNCT) == (tok.klass == PUNCTUATION)
