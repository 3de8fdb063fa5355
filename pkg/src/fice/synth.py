"""Synthetic corpus generator with planted ground truth.

Each planted entity follows a known Gaussian-mixture lifecycle; documents
are packed so the observed per-year document frequency equals the rounded
true curve exactly. Citation counts are coupled monotonically to each
document's mean planted freshness, so the citation correlation has a known
sign. Ground truth carries oracle lifetime ratios computed by direct
summation, independent of the fitting pipeline.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .corpus import DocumentRecord, EntityMention, dump_bibtex
from .dfcurve import GaussianProfile, evaluate, predict_t_end
from .errors import DataError

log = logging.getLogger(__name__)

MAX_ENTITIES_PER_DOC = 3
CITATION_NOISE_RANGE = (0.8, 1.25)
CITATION_BASE = 3.0
CITATION_FRESHNESS_GAIN = 3.0


@dataclass(frozen=True)
class GeneratorSpec:
    """Size and seed of a synthetic corpus."""

    n_entities: int
    year_start: int
    year_end: int
    profiles_per_entity: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_entities < 1:
            raise DataError("n_entities must be positive")
        if self.year_end - self.year_start < 10:
            raise DataError("year span must cover at least 10 years")
        if self.profiles_per_entity < 1:
            raise DataError("profiles_per_entity must be positive")


@dataclass(frozen=True)
class PlantedEntity:
    """Ground truth for one synthetic entity."""

    surface: str
    profiles: tuple[GaussianProfile, ...]
    counts: Mapping[int, int]
    t_start: int
    t_end: int


@dataclass(frozen=True)
class SynthCorpus:
    """Generated artifacts in the pipeline's input formats."""

    documents: tuple[DocumentRecord, ...]
    mentions: tuple[EntityMention, ...]
    entities: tuple[PlantedEntity, ...]
    doc_c5: Mapping[str, int]
    doc_mean_freshness: Mapping[str, float]
    bibtex: str
    entities_jsonl: str
    citations_json: str
    ground_truth_json: str


def _planted_counts(profiles, year_start: int, year_end: int) -> dict[int, int]:
    counts = {}
    for year in range(year_start, year_end + 1):
        value = round(evaluate(profiles, year))
        if value < 0:
            raise DataError(f"planted curve negative at {year}")
        if value > 0:
            counts[year] = value
    return counts


def _draw_entity(index: int, spec: GeneratorSpec, rng: np.random.Generator) -> PlantedEntity:
    """One entity with its curve contained well inside the corpus span.

    The left margin keeps the rounded curve from being truncated at birth;
    the right side may leave a small predicted tail past year_end, which is
    exactly what the fitting stage is expected to model.
    """
    profiles = []
    margin = 14
    for _ in range(spec.profiles_per_entity):
        amplitude = float(rng.uniform(4.0, 12.0))
        mean = float(rng.uniform(spec.year_start + margin, spec.year_end - 2))
        dispersion = float(rng.uniform(1.5, 3.5))
        profiles.append(GaussianProfile(amplitude, mean, dispersion))
    profiles.sort(key=lambda p: p.mean)
    counts = _planted_counts(profiles, spec.year_start, spec.year_end)
    if not counts:
        raise DataError(f"entity {index}: planted curve rounds to zero everywhere")
    t_start = min(counts)
    t_end = predict_t_end(profiles, t_last_observed=max(counts), t_first=t_start)
    return PlantedEntity(
        surface=f"alpha{index:04d} beta{index:04d}",
        profiles=tuple(profiles),
        counts=counts,
        t_start=t_start,
        t_end=t_end,
    )


def oracle_ratio(entity: PlantedEntity, t0: int, year_end: int) -> float:
    """Lifetime ratio by direct summation of the planted curve.

    Rounded counts inside the corpus span, real-valued curve beyond it;
    the same convention the pipeline applies with its fitted model.
    """
    if t0 < entity.t_start:
        raise DataError(f"{entity.surface}: {t0} precedes first appearance")
    numerator = sum(c for t, c in entity.counts.items() if t <= t0)
    denominator = sum(entity.counts.values()) + sum(
        evaluate(entity.profiles, t) for t in range(year_end + 1, entity.t_end + 1)
    )
    return min(max(numerator / denominator, 0.0), 1.0)


def _pack_documents(
    entities: tuple[PlantedEntity, ...], spec: GeneratorSpec
) -> tuple[list[DocumentRecord], list[EntityMention]]:
    """Greedy year-by-year packing of entity appearances into titles.

    Each document carries 1 to 3 distinct entities; taking the entities
    with the largest remaining appearance counts first guarantees every
    planted appearance lands in some document.
    """
    documents = []
    mentions = []
    serial = 0
    for year in range(spec.year_start, spec.year_end + 1):
        remaining = {
            i: entity.counts.get(year, 0)
            for i, entity in enumerate(entities)
            if entity.counts.get(year, 0) > 0
        }
        while remaining:
            chosen = sorted(remaining, key=lambda i: (-remaining[i], i))[:MAX_ENTITIES_PER_DOC]
            doc_id = f"syn-{year}-{serial:05d}"
            serial += 1
            surfaces = [entities[i].surface for i in chosen]
            documents.append(DocumentRecord(doc_id, year, " and ".join(surfaces)))
            for i in chosen:
                mentions.append(EntityMention(doc_id, entities[i].surface))
                remaining[i] -= 1
                if remaining[i] == 0:
                    del remaining[i]
    return documents, mentions


def _plant_citations(
    documents: list[DocumentRecord],
    mentions: list[EntityMention],
    entities: tuple[PlantedEntity, ...],
    spec: GeneratorSpec,
    rng: np.random.Generator,
) -> tuple[dict[str, int], dict[str, float], dict[str, dict[int, int]]]:
    """Citations rise monotonically with mean planted freshness, plus noise."""
    by_surface = {e.surface: e for e in entities}
    surfaces_by_doc: dict[str, list[str]] = {}
    for mention in mentions:
        surfaces_by_doc.setdefault(mention.doc_id, []).append(mention.surface)

    doc_c5: dict[str, int] = {}
    doc_fresh: dict[str, float] = {}
    per_doc_years: dict[str, dict[int, int]] = {}
    for doc in documents:
        fresh_values = [
            1.0 - oracle_ratio(by_surface[s], doc.year, spec.year_end)
            for s in surfaces_by_doc[doc.doc_id]
        ]
        mean_fresh = sum(fresh_values) / len(fresh_values)
        noise = float(rng.uniform(*CITATION_NOISE_RANGE))
        c5_total = int(round(CITATION_BASE * math.exp(CITATION_FRESHNESS_GAIN * mean_fresh) * noise))
        doc_c5[doc.doc_id] = c5_total
        doc_fresh[doc.doc_id] = mean_fresh
        base, extra = divmod(c5_total, 5)
        per_doc_years[doc.doc_id] = {
            doc.year + k: base + (1 if k < extra else 0) for k in range(5)
        }
        per_doc_years[doc.doc_id] = {
            y: c for y, c in per_doc_years[doc.doc_id].items() if c > 0
        }
    return doc_c5, doc_fresh, per_doc_years


def generate_corpus(spec: GeneratorSpec) -> SynthCorpus:
    """Build a corpus whose observed df curves equal planted rounded curves.

    Fixed seeds produce byte-identical artifacts.
    """
    rng = np.random.default_rng(spec.seed)
    entities = tuple(_draw_entity(i, spec, rng) for i in range(spec.n_entities))
    documents, mentions = _pack_documents(entities, spec)
    doc_c5, doc_fresh, citation_years = _plant_citations(
        documents, mentions, entities, spec, rng
    )

    surfaces_by_doc: dict[str, list[str]] = {}
    for mention in mentions:
        surfaces_by_doc.setdefault(mention.doc_id, []).append(mention.surface)
    entities_jsonl = "".join(
        json.dumps(
            {"doc_id": doc.doc_id, "entities": sorted(surfaces_by_doc[doc.doc_id])},
            sort_keys=True,
        )
        + "\n"
        for doc in documents
    )
    citations_json = json.dumps(
        {
            doc_id: {str(y): c for y, c in sorted(years.items())}
            for doc_id, years in sorted(citation_years.items())
        },
        indent=2,
        sort_keys=True,
    )
    ground_truth = {
        "spec": {
            "n_entities": spec.n_entities,
            "year_start": spec.year_start,
            "year_end": spec.year_end,
            "profiles_per_entity": spec.profiles_per_entity,
            "seed": spec.seed,
        },
        "entities": [
            {
                "surface": e.surface,
                "profiles": [
                    {"amplitude": p.amplitude, "mean": p.mean, "dispersion": p.dispersion}
                    for p in e.profiles
                ],
                "t_start": e.t_start,
                "t_end": e.t_end,
                "counts": {str(y): c for y, c in sorted(e.counts.items())},
                "ratios": {
                    str(t): oracle_ratio(e, t, spec.year_end)
                    for t in range(e.t_start, spec.year_end + 1)
                },
            }
            for e in entities
        ],
        "documents": {
            doc.doc_id: {
                "year": doc.year,
                "mean_freshness": doc_fresh[doc.doc_id],
                "c5": doc_c5[doc.doc_id],
            }
            for doc in documents
        },
    }
    return SynthCorpus(
        documents=tuple(documents),
        mentions=tuple(mentions),
        entities=entities,
        doc_c5=doc_c5,
        doc_mean_freshness=doc_fresh,
        bibtex=dump_bibtex(documents),
        entities_jsonl=entities_jsonl,
        citations_json=citations_json,
        ground_truth_json=json.dumps(ground_truth, indent=2, sort_keys=True),
    )
