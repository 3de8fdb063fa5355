"""Corpus ingestion: BibTeX subset parser, mention loading, index building."""

import json

import pytest

from fice.corpus import (
    BibtexParseError,
    CitationRecord,
    DocumentRecord,
    EntityMention,
    build_index,
    dump_bibtex,
    dump_citations,
    dump_corpus,
    load_citations,
    load_corpus,
    load_entities,
    normalize_surface,
    parse_bibtex,
    year_report,
)
from fice.errors import DataError


class TestParseBibtex:
    def test_single_well_formed_entry(self):
        records, skipped = parse_bibtex(
            "@inproceedings{a1, title = {Machine Translation}, year = {1999}}"
        )
        assert records == [DocumentRecord("a1", 1999, "Machine Translation")]
        assert skipped == 0

    def test_unparsable_year_is_skipped_and_counted(self):
        records, skipped = parse_bibtex(
            "@article{a1, title = {Something}, year = {199X}}"
        )
        assert records == []
        assert skipped == 1

    def test_brace_groups_flattened_in_title(self):
        # rule applied by hand: braces removed, contents kept
        records, _ = parse_bibtex(
            "@article{a1, title = {{BERT}-based {NER}}, year = {2020}}"
        )
        assert records[0].title == "BERT-based NER"

    def test_missing_title_is_skipped(self):
        records, skipped = parse_bibtex("@article{a1, year = {1999}}")
        assert records == []
        assert skipped == 1

    def test_empty_title_after_normalization_is_skipped(self):
        records, skipped = parse_bibtex("@article{a1, title = {  {} }, year = {1999}}")
        assert records == []
        assert skipped == 1

    def test_year_out_of_range_is_skipped(self):
        records, skipped = parse_bibtex("@article{a1, title = {X}, year = {1750}}")
        assert (records, skipped) == ([], 1)

    def test_year_is_first_four_digit_integer(self):
        records, _ = parse_bibtex("@article{a1, title = {X}, year = {June 2003 (rev. 2004)}}")
        assert records[0].year == 2003

    def test_five_digit_run_is_not_a_year(self):
        records, skipped = parse_bibtex("@article{a1, title = {X}, year = {20031}}")
        assert (records, skipped) == ([], 1)

    def test_quoted_values_and_bare_years(self):
        records, _ = parse_bibtex('@article{a1, title = "Plain Title", year = 2001}')
        assert records == [DocumentRecord("a1", 2001, "Plain Title")]

    def test_unbalanced_braces_raise_with_byte_offset(self):
        text = "@article{a1, title = {Broken, year = {1999}"
        with pytest.raises(BibtexParseError) as err:
            parse_bibtex(text)
        assert err.value.offset == text.index("{")
        assert "byte offset" in str(err.value)

    def test_junk_between_entries_is_ignored(self):
        text = (
            "This bibliography was exported.\n"
            "@article{a1, title = {First}, year = {1999}}\n"
            "% a comment with an email addr@ess\n"
            "@article{a2, title = {Second}, year = {2000}}\n"
        )
        records, skipped = parse_bibtex(text)
        assert [r.doc_id for r in records] == ["a1", "a2"]
        assert skipped == 0

    def test_comment_and_string_blocks_skipped_silently(self):
        text = "@string{acl = {ACL}}\n@article{a1, title = {T}, year = {1999}}"
        records, skipped = parse_bibtex(text)
        assert len(records) == 1 and skipped == 0

    def test_nested_braces_kept_balanced(self):
        records, _ = parse_bibtex(
            "@article{a1, title = {An {{Extremely} Nested} Title}, year = {2010}}"
        )
        assert records[0].title == "An Extremely Nested Title"

    def test_commas_inside_braces_do_not_split_fields(self):
        records, _ = parse_bibtex(
            "@article{a1, title = {Commas, Braces, and More}, year = {2010}}"
        )
        assert records[0].title == "Commas, Braces, and More"

    def test_roundtrip_stability(self):
        text = (
            "@article{a1, title = {Parsing, with {Nested} Groups}, year = {1999}}\n"
            "@inproceedings{b2, title = \"Another Title\", year = 2005}\n"
            "@misc{c3, title = {Third   entry  title}, year = {2011}}\n"
        )
        first, _ = parse_bibtex(text)
        second, skipped = parse_bibtex(dump_bibtex(first))
        assert second == first
        assert skipped == 0


class TestLoadEntities:
    def test_normalization(self):
        mentions, dropped = load_entities(
            ['{"doc_id": "a1", "entities": ["Machine  Learning"]}']
        )
        assert mentions == [EntityMention("a1", "machine learning")]
        assert dropped == 0

    def test_empty_entity_list(self):
        mentions, dropped = load_entities(['{"doc_id": "a1", "entities": []}'])
        assert mentions == [] and dropped == 0

    def test_three_records_three_entities_each(self):
        # average of about 3 entities per title
        lines = [
            json.dumps({"doc_id": f"d{i}", "entities": [f"e{i}{j}" for j in range(3)]})
            for i in range(3)
        ]
        mentions, _ = load_entities(lines)
        assert len(mentions) == 9

    def test_malformed_line_names_line_number(self):
        lines = ['{"doc_id": "a1", "entities": []}', "{not json"]
        with pytest.raises(DataError, match="line 2"):
            load_entities(lines)

    def test_missing_fields_is_an_error(self):
        with pytest.raises(DataError, match="line 1"):
            load_entities(['{"doc_id": "a1"}'])

    def test_unknown_doc_id_dropped_with_count(self):
        lines = [
            '{"doc_id": "a1", "entities": ["alpha"]}',
            '{"doc_id": "ghost", "entities": ["beta", "gamma"]}',
        ]
        mentions, dropped = load_entities(lines, known_ids={"a1"})
        assert [m.doc_id for m in mentions] == ["a1"]
        assert dropped == 2

    def test_blank_lines_ignored(self):
        mentions, _ = load_entities(["", '{"doc_id": "a1", "entities": ["x"]}', "  "])
        assert len(mentions) == 1

    def test_empty_surface_dropped(self):
        mentions, dropped = load_entities(['{"doc_id": "a1", "entities": ["   "]}'])
        assert mentions == [] and dropped == 1


class TestBuildIndex:
    def docs(self):
        return [
            DocumentRecord("c", 2001, "Third"),
            DocumentRecord("a", 1999, "First"),
            DocumentRecord("b", 2000, "Second"),
        ]

    def test_chronological_sort(self):
        index = build_index(self.docs())
        assert [d.year for d in index.documents] == [1999, 2000, 2001]

    def test_year_bounds(self):
        docs = [DocumentRecord("a", 1952, "T"), DocumentRecord("b", 2020, "U")]
        index = build_index(docs)
        assert (index.year_min, index.year_max) == (1952, 2020)

    def test_duplicate_doc_id_rejected(self):
        docs = [DocumentRecord("a", 1999, "T"), DocumentRecord("a", 2000, "U")]
        with pytest.raises(DataError, match="duplicate"):
            build_index(docs)

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            build_index([])

    def test_tie_broken_by_doc_id(self):
        docs = [DocumentRecord("z", 2000, "T"), DocumentRecord("a", 2000, "U")]
        index = build_index(docs)
        assert [d.doc_id for d in index.documents] == ["a", "z"]

    def test_order_is_independent_of_input_order(self):
        docs = self.docs()
        a = build_index(docs)
        b = build_index(list(reversed(docs)))
        assert a.documents == b.documents

    def test_mention_with_unknown_doc_rejected(self):
        with pytest.raises(DataError, match="unknown doc_id"):
            build_index(self.docs(), [EntityMention("ghost", "x")])

    def test_mentions_grouped_by_doc(self):
        mentions = [EntityMention("a", "x"), EntityMention("a", "y"), EntityMention("b", "z")]
        index = build_index(self.docs(), mentions)
        assert len(index.mentions("a")) == 2
        assert index.mentions("missing") == ()

    def test_every_mention_within_observable_period(self):
        mentions = [EntityMention("a", "x"), EntityMention("c", "y")]
        index = build_index(self.docs(), mentions)
        for m in index.all_mentions():
            assert index.year_min <= index.document(m.doc_id).year <= index.year_max


class TestCitations:
    def test_load_and_dump(self):
        text = '{"a1": {"2015": 1, "2016": 2}}'
        records = load_citations(text)
        assert records["a1"].per_year == {2015: 1, 2016: 2}
        assert load_citations(dump_citations(records)) == records

    def test_negative_count_rejected(self):
        with pytest.raises(DataError):
            load_citations('{"a1": {"2015": -1}}')

    def test_year_out_of_range_rejected(self):
        with pytest.raises(DataError):
            CitationRecord("a1", {1492: 3})


class TestCorpusArtifact:
    def test_roundtrip(self):
        docs = [DocumentRecord("a", 1999, "First"), DocumentRecord("b", 2001, "Second")]
        mentions = [EntityMention("a", "alpha"), EntityMention("b", "beta")]
        index = build_index(docs, mentions)
        restored = load_corpus(dump_corpus(index))
        assert restored.documents == index.documents
        assert restored.mentions_by_doc == index.mentions_by_doc

    def test_year_report_counts(self):
        docs = [
            DocumentRecord("a", 1999, "T"),
            DocumentRecord("b", 1999, "U"),
            DocumentRecord("c", 2001, "V"),
        ]
        mentions = [
            EntityMention("a", "alpha"),
            EntityMention("b", "alpha"),
            EntityMention("b", "beta"),
        ]
        rows = year_report(build_index(docs, mentions))
        assert rows[0] == (1999, 2, 3, 2)
        assert rows[1] == (2000, 0, 0, 0)
        assert rows[2] == (2001, 1, 0, 0)


def test_normalize_surface():
    assert normalize_surface("  Machine\tLearning ") == "machine learning"
