"""Entity disambiguation: conflate similar surfaces into canonical entities.

Similarity scores are normally supplied externally (any pairwise scoring
model); a lexical Jaccard fallback covers pairs without a supplied score.
Surfaces whose pairwise score meets the threshold are merged via the
connected components of the similarity graph, which guarantees a proper
partition of the surface set.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .corpus import CorpusIndex, EntityMention
from .errors import DataError

log = logging.getLogger(__name__)

Pair = tuple[str, str]

SCORES_HEADER = ["surface_a", "surface_b", "score"]
MAPPING_HEADER = ["surface", "entity_id", "canonical_surface"]


@dataclass(frozen=True)
class CanonicalEntity:
    """A disambiguated entity and the surfaces it subsumes."""

    entity_id: str
    canonical_surface: str
    members: frozenset[str]


class UnionFind:
    """Disjoint sets over hashable items with path compression."""

    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)

    def groups(self) -> dict:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return out


def pair_key(a: str, b: str) -> Pair:
    """Canonical unordered-pair key."""
    return (a, b) if a <= b else (b, a)


def fallback_similarity(a: str, b: str) -> float:
    """Jaccard similarity over lowercase whitespace-token sets."""
    ta = set(a.lower().split())
    tb = set(b.lower().split())
    if not ta and not tb:
        return 1.0
    union = ta | tb
    if not union:
        return 0.0
    return len(ta & tb) / len(union)


def conflate(
    mentions: Iterable[EntityMention],
    scores: Mapping[Pair, float] | Iterable[tuple[str, str, float]],
    threshold: float,
    inclusive: bool = True,
) -> tuple[list[CanonicalEntity], dict[str, str]]:
    """Merge surfaces into canonical entities by thresholded similarity.

    Surfaces connected through pairs scoring at the threshold (>= when
    ``inclusive``, > otherwise) become one entity; missing pairs count as
    below threshold. The canonical surface is the member with the highest
    raw mention count, ties broken lexicographically. Returns the entities
    plus a surface -> entity_id lookup covering every mentioned surface.
    """
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold must be in [0, 1], got {threshold}")
    counts: dict[str, int] = {}
    for mention in mentions:
        counts[mention.surface] = counts.get(mention.surface, 0) + 1
    if isinstance(scores, Mapping):
        score_items = [(a, b, s) for (a, b), s in scores.items()]
    else:
        score_items = list(scores)

    uf = UnionFind()
    for surface in counts:
        uf.find(surface)
    for a, b, score in score_items:
        if not 0.0 <= score <= 1.0:
            raise DataError(f"similarity score for ({a!r}, {b!r}) outside [0, 1]: {score}")
        if a not in counts or b not in counts:
            continue
        if score >= threshold if inclusive else score > threshold:
            uf.union(a, b)

    entities: list[CanonicalEntity] = []
    mapping: dict[str, str] = {}
    # entity ids follow canonical-surface order so they are a deterministic
    # function of the input set, not of mention order
    picked = []
    for group in uf.groups().values():
        canonical = min(group, key=lambda s: (-counts[s], s))
        picked.append((canonical, group))
    picked.sort(key=lambda item: item[0])
    for i, (canonical, group) in enumerate(picked):
        entity = CanonicalEntity(
            entity_id=f"e{i:06d}",
            canonical_surface=canonical,
            members=frozenset(group),
        )
        entities.append(entity)
        for surface in group:
            mapping[surface] = entity.entity_id
    return entities, mapping


# ---------------------------------------------------------------------------
# Pair enumeration and scoring
# ---------------------------------------------------------------------------


def enumerate_pairs(
    index: CorpusIndex,
    quota: int | None = None,
) -> set[Pair]:
    """Candidate surface pairs for scoring.

    With ``quota`` set, only surfaces co-occurring inside the same
    chronological quota of that many documents are paired (the trailing
    partial quota is included for scoring purposes); with ``quota=None``
    every surface pair in the corpus is a candidate.
    """
    if quota is None:
        windows = [index.documents]
    else:
        if quota < 1:
            raise DataError(f"quota must be >= 1, got {quota}")
        docs = index.documents
        windows = [docs[i:i + quota] for i in range(0, len(docs), quota)]
    pairs: set[Pair] = set()
    for window in windows:
        surfaces = sorted({m.surface for d in window for m in index.mentions(d.doc_id)})
        for i, a in enumerate(surfaces):
            for b in surfaces[i + 1:]:
                pairs.add((a, b))
    return pairs


def score_pairs(
    pairs: Iterable[Pair],
    supplied: Mapping[Pair, float] | None = None,
    scorer: Callable[[str, str], float] = fallback_similarity,
) -> dict[Pair, float]:
    """Score candidate pairs; supplied scores take precedence per pair."""
    supplied = supplied or {}
    out: dict[Pair, float] = {}
    for a, b in pairs:
        key = pair_key(a, b)
        out[key] = supplied[key] if key in supplied else scorer(a, b)
    return out


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def read_scores(text: str) -> dict[Pair, float]:
    """Read a `surface_a,surface_b,score` CSV into a pair->score map."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != SCORES_HEADER:
        raise DataError(f"scores file must have header {','.join(SCORES_HEADER)}")
    scores: dict[Pair, float] = {}
    for lineno, row in enumerate(reader, start=2):
        key = pair_key(row["surface_a"], row["surface_b"])
        try:
            score = float(row["score"])
        except (TypeError, ValueError):
            raise DataError(f"scores line {lineno}: non-numeric score")
        if not 0.0 <= score <= 1.0:
            raise DataError(f"scores line {lineno}: score {score} outside [0, 1]")
        if key in scores:
            raise DataError(f"scores line {lineno}: duplicate pair {key}")
        scores[key] = score
    return scores


def dump_mapping(entities: Iterable[CanonicalEntity]) -> str:
    """Serialize the surface -> entity mapping as CSV."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MAPPING_HEADER)
    rows = []
    for entity in entities:
        for surface in sorted(entity.members):
            rows.append((surface, entity.entity_id, entity.canonical_surface))
    for row in sorted(rows):
        writer.writerow(row)
    return buf.getvalue()


def load_mapping(text: str) -> tuple[list[CanonicalEntity], dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != MAPPING_HEADER:
        raise DataError(f"mapping file must have header {','.join(MAPPING_HEADER)}")
    members: dict[str, set[str]] = {}
    canonical: dict[str, str] = {}
    mapping: dict[str, str] = {}
    for row in reader:
        eid = row["entity_id"]
        members.setdefault(eid, set()).add(row["surface"])
        canonical[eid] = row["canonical_surface"]
        mapping[row["surface"]] = eid
    entities = [
        CanonicalEntity(eid, canonical[eid], frozenset(members[eid]))
        for eid in sorted(members)
    ]
    return entities, mapping
