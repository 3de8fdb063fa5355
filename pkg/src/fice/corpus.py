"""Bibliographic metadata ingestion: BibTeX entries, entity-mention files,
and per-paper citation records, indexed into an immutable in-memory corpus.

Only a pragmatic BibTeX subset is supported: ``@type{key, field = value, ...}``
blocks with brace-delimited, quoted, or bare field values. String macros,
cross-references and ``@preamble`` are out of scope; titles keep their LaTeX
macros verbatim except that brace groups are flattened.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import DataError

log = logging.getLogger(__name__)

YEAR_MIN = 1900
YEAR_MAX = 2100

_YEAR_RE = re.compile(r"(?<!\d)(\d{4})(?!\d)")
_FIELD_NAME_RE = re.compile(r"\s*([A-Za-z][\w-]*)\s*=\s*", re.ASCII)


class BibtexParseError(DataError):
    """Unrecoverable BibTeX syntax error at a known byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class DocumentRecord:
    """One paper: identifier, publication year, title text."""

    doc_id: str
    year: int
    title: str

    def sort_key(self) -> tuple[int, str]:
        return (self.year, self.doc_id)


@dataclass(frozen=True)
class EntityMention:
    """A raw (undisambiguated) entity occurrence in one document's title."""

    doc_id: str
    surface: str


@dataclass(frozen=True)
class CitationRecord:
    """Per-year citation counts for one paper."""

    doc_id: str
    per_year: Mapping[int, int]

    def __post_init__(self):
        for year, count in self.per_year.items():
            if not YEAR_MIN <= year <= YEAR_MAX:
                raise DataError(f"citation year {year} outside [{YEAR_MIN}, {YEAR_MAX}]")
            if count < 0:
                raise DataError(f"negative citation count for {self.doc_id} in {year}")


@dataclass(frozen=True)
class CorpusIndex:
    """Immutable corpus: documents sorted by (year, doc_id) plus their mentions."""

    documents: tuple[DocumentRecord, ...]
    mentions_by_doc: Mapping[str, tuple[EntityMention, ...]]
    year_min: int
    year_max: int
    _by_id: Mapping[str, DocumentRecord] = field(default_factory=dict, repr=False)

    def document(self, doc_id: str) -> DocumentRecord:
        return self._by_id[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def mentions(self, doc_id: str) -> tuple[EntityMention, ...]:
        return self.mentions_by_doc.get(doc_id, ())

    def all_mentions(self) -> Iterator[EntityMention]:
        for doc in self.documents:
            yield from self.mentions(doc.doc_id)


def normalize_surface(surface: str) -> str:
    """Lowercase and collapse internal whitespace."""
    return " ".join(surface.lower().split())


def normalize_title(title: str) -> str:
    return " ".join(title.split())


# ---------------------------------------------------------------------------
# BibTeX parsing
# ---------------------------------------------------------------------------


def _match_braces(text: str, start: int) -> int:
    """Return the index just past the brace group opening at ``start``.

    Raises BibtexParseError if the group is never closed.
    """
    depth = 0
    for i in range(start, len(text)):
        c = text[i]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    raise BibtexParseError("unbalanced braces: group is never closed", start)


def _split_fields(body: str) -> Iterator[str]:
    """Split an entry body on commas at brace depth zero."""
    depth = 0
    piece_start = 0
    in_quote = False
    for i, c in enumerate(body):
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
        elif c == '"' and depth == 0:
            in_quote = not in_quote
        elif c == "," and depth == 0 and not in_quote:
            yield body[piece_start:i]
            piece_start = i + 1
    yield body[piece_start:]


def _field_value(raw: str) -> str:
    """Strip one layer of value delimiters ({...} or "...") from a field."""
    raw = raw.strip()
    if raw.startswith("{") and raw.endswith("}"):
        return raw[1:-1]
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    return raw


def _entry_fields(body: str) -> dict[str, str] | None:
    """Parse ``name = value`` pairs; None signals a malformed entry body."""
    fields: dict[str, str] = {}
    for piece in _split_fields(body):
        if not piece.strip():
            continue
        m = _FIELD_NAME_RE.match(piece)
        if m is None:
            return None
        fields[m.group(1).lower()] = _field_value(piece[m.end():])
    return fields


def flatten_braces(text: str) -> str:
    """Remove brace characters, keeping their contents."""
    return text.replace("{", "").replace("}", "")


def _parse_year(raw: str) -> int | None:
    m = _YEAR_RE.search(raw)
    if m is None:
        return None
    year = int(m.group(1))
    if not YEAR_MIN <= year <= YEAR_MAX:
        return None
    return year


def parse_bibtex(text: str) -> tuple[list[DocumentRecord], int]:
    """Parse BibTeX text into documents with a year and a title.

    Entries missing a parsable year or a non-empty title are skipped; the
    skip count is returned alongside the accepted records. Unbalanced braces
    at the top level raise BibtexParseError naming the byte offset.
    """
    records: list[DocumentRecord] = []
    skipped = 0
    pos = 0
    n = len(text)
    while True:
        at = text.find("@", pos)
        if at < 0:
            break
        m = re.compile(r"@\s*([A-Za-z]+)\s*").match(text, at)
        if m is None or m.end() >= n or text[m.end()] != "{":
            pos = at + 1
            continue
        entry_type = m.group(1).lower()
        open_brace = m.end()
        end = _match_braces(text, open_brace)
        pos = end
        if entry_type in ("comment", "preamble", "string"):
            continue
        body = text[open_brace + 1:end - 1]
        key, comma, rest = body.partition(",")
        key = key.strip()
        if not comma or not key:
            skipped += 1
            continue
        fields = _entry_fields(rest)
        if fields is None:
            skipped += 1
            continue
        year = _parse_year(fields.get("year", ""))
        title = normalize_title(flatten_braces(fields.get("title", "")))
        if year is None or not title:
            skipped += 1
            continue
        records.append(DocumentRecord(doc_id=key, year=year, title=title))
    if skipped:
        log.info("parse_bibtex: skipped %d entries without usable year/title", skipped)
    return records, skipped


def dump_bibtex(records: Iterable[DocumentRecord]) -> str:
    """Serialize records back to the accepted BibTeX subset."""
    chunks = []
    for rec in records:
        chunks.append(
            f"@misc{{{rec.doc_id},\n"
            f"  title = {{{rec.title}}},\n"
            f"  year = {{{rec.year}}}\n"
            f"}}\n"
        )
    return "\n".join(chunks)


# ---------------------------------------------------------------------------
# Entity mentions (line-delimited JSON) and citation files
# ---------------------------------------------------------------------------


def load_entities(
    lines: Iterable[str],
    known_ids: set[str] | None = None,
) -> tuple[list[EntityMention], int]:
    """Read mention records, one JSON object per line.

    Each record is ``{"doc_id": ..., "entities": [...]}``. Surfaces are
    lowercased with collapsed whitespace. When ``known_ids`` is given,
    mentions pointing at unknown documents are dropped with a warning;
    the dropped count is returned with the mentions.
    """
    mentions: list[EntityMention] = []
    dropped = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"entities line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict) or "doc_id" not in record or "entities" not in record:
            raise DataError(f"entities line {lineno}: expected doc_id and entities fields")
        doc_id = record["doc_id"]
        surfaces = record["entities"]
        if not isinstance(doc_id, str) or not isinstance(surfaces, list):
            raise DataError(f"entities line {lineno}: doc_id must be a string and entities a list")
        if known_ids is not None and doc_id not in known_ids:
            log.warning("entities line %d: unknown doc_id %r, dropped", lineno, doc_id)
            dropped += len(surfaces)
            continue
        for surface in surfaces:
            normalized = normalize_surface(str(surface))
            if not normalized:
                log.warning("entities line %d: empty surface dropped", lineno)
                dropped += 1
                continue
            mentions.append(EntityMention(doc_id=doc_id, surface=normalized))
    return mentions, dropped


def load_citations(text: str) -> dict[str, CitationRecord]:
    """Parse the citations JSON map ``{doc_id: {year: count, ...}}``."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"citations file: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise DataError("citations file: expected a JSON object keyed by doc_id")
    records = {}
    for doc_id, per_year in data.items():
        if not isinstance(per_year, dict):
            raise DataError(f"citations for {doc_id!r}: expected a year->count object")
        try:
            counts = {int(y): int(c) for y, c in per_year.items()}
        except (TypeError, ValueError) as exc:
            raise DataError(f"citations for {doc_id!r}: non-integer year or count") from exc
        records[doc_id] = CitationRecord(doc_id=doc_id, per_year=counts)
    return records


def dump_citations(records: Mapping[str, CitationRecord]) -> str:
    data = {
        doc_id: {str(y): rec.per_year[y] for y in sorted(rec.per_year)}
        for doc_id, rec in sorted(records.items())
    }
    return json.dumps(data, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Index construction
# ---------------------------------------------------------------------------


def build_index(
    docs: Iterable[DocumentRecord],
    mentions: Iterable[EntityMention] = (),
) -> CorpusIndex:
    """Assemble the immutable corpus index, validating all type invariants."""
    ordered = sorted(docs, key=DocumentRecord.sort_key)
    if not ordered:
        raise DataError("cannot build an index over an empty document list")
    by_id: dict[str, DocumentRecord] = {}
    for doc in ordered:
        if doc.doc_id in by_id:
            raise DataError(f"duplicate doc_id {doc.doc_id!r}")
        if not YEAR_MIN <= doc.year <= YEAR_MAX:
            raise DataError(f"document {doc.doc_id!r}: year {doc.year} outside [{YEAR_MIN}, {YEAR_MAX}]")
        if not doc.title.strip():
            raise DataError(f"document {doc.doc_id!r}: empty title")
        by_id[doc.doc_id] = doc
    grouped: dict[str, list[EntityMention]] = {}
    for mention in mentions:
        if mention.doc_id not in by_id:
            raise DataError(f"mention references unknown doc_id {mention.doc_id!r}")
        if not mention.surface:
            raise DataError(f"mention on {mention.doc_id!r} has an empty surface")
        grouped.setdefault(mention.doc_id, []).append(mention)
    return CorpusIndex(
        documents=tuple(ordered),
        mentions_by_doc={k: tuple(v) for k, v in grouped.items()},
        year_min=ordered[0].year,
        year_max=max(d.year for d in ordered),
        _by_id=by_id,
    )


def year_report(index: CorpusIndex) -> list[tuple[int, int, int, int]]:
    """Per-year (papers, mentions, distinct surfaces) over the observable period."""
    papers: dict[int, int] = {}
    mention_counts: dict[int, int] = {}
    surfaces: dict[int, set[str]] = {}
    for doc in index.documents:
        papers[doc.year] = papers.get(doc.year, 0) + 1
        for mention in index.mentions(doc.doc_id):
            mention_counts[doc.year] = mention_counts.get(doc.year, 0) + 1
            surfaces.setdefault(doc.year, set()).add(mention.surface)
    return [
        (year, papers.get(year, 0), mention_counts.get(year, 0), len(surfaces.get(year, ())))
        for year in range(index.year_min, index.year_max + 1)
    ]


# ---------------------------------------------------------------------------
# Corpus stage artifact (JSON)
# ---------------------------------------------------------------------------


def dump_corpus(index: CorpusIndex, skipped_entries: int = 0) -> str:
    data = {
        "documents": [
            {"doc_id": d.doc_id, "year": d.year, "title": d.title}
            for d in index.documents
        ],
        "mentions": [
            {"doc_id": m.doc_id, "surface": m.surface}
            for m in index.all_mentions()
        ],
        "skipped_entries": skipped_entries,
    }
    return json.dumps(data, indent=2, sort_keys=True)


def load_corpus(text: str) -> CorpusIndex:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"corpus file: invalid JSON ({exc.msg})") from exc
    docs = [DocumentRecord(d["doc_id"], int(d["year"]), d["title"]) for d in data["documents"]]
    mentions = [EntityMention(m["doc_id"], m["surface"]) for m in data["mentions"]]
    return build_index(docs, mentions)
