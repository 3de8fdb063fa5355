"""Lifetime ratio, freshness, informativity weights, FICE, and C5.

The lifetime ratio of an entity at year t0 is its cumulative document
frequency through t0 divided by its full-lifetime total. Inside the corpus
span the totals use observed integer counts; beyond it the fitted curve's
real-valued predictions fill in the tail through the entity's t_end.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import CitationRecord, DocumentRecord
from .dfcurve import DfModel, DfSeries, evaluate
from .errors import DataError

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "quota_id,year_span,fice,dichotomous,weight_only,ratio_only,mean_c5,fice_stddev"
)


@dataclass(frozen=True)
class EntityTimeline:
    """Cumulative document-frequency view of one entity's lifetime.

    ``cum_observed`` maps each year from t_start through the last observed
    year to the observed count accumulated so far; ``lifetime_total`` adds
    the fitted tail beyond the corpus span, so it can exceed the final
    observed cumulative value.
    """

    entity_id: str
    t_start: int
    t_end: int
    cum_observed: Mapping[int, float]
    lifetime_total: float

    def __post_init__(self):
        if self.t_start > self.t_end:
            raise DataError(f"{self.entity_id}: t_start {self.t_start} > t_end {self.t_end}")
        if not self.lifetime_total > 0:
            raise DataError(f"{self.entity_id}: lifetime_total must be positive")
        if not self.cum_observed:
            raise DataError(f"{self.entity_id}: cum_observed is empty")
        previous = 0.0
        for year in sorted(self.cum_observed):
            value = self.cum_observed[year]
            if value < previous:
                raise DataError(f"{self.entity_id}: cumulative counts decrease at {year}")
            previous = value
        if self.cum_observed and self.lifetime_total < previous - 1e-9:
            raise DataError(f"{self.entity_id}: lifetime_total below observed total")

    def cum(self, t0: int) -> float:
        """Cumulative observed document frequency through year t0."""
        if t0 < self.t_start:
            raise DataError(
                f"{self.entity_id}: year {t0} precedes first appearance {self.t_start}"
            )
        last = max(self.cum_observed)
        return float(self.cum_observed[min(t0, last)])


def build_timeline(series: DfSeries, model: DfModel, year_max: int) -> EntityTimeline:
    """Combine observed counts and the fitted tail into one timeline.

    Years inside the corpus span contribute their observed counts; years in
    (year_max, t_end] contribute the model's real-valued predictions.
    """
    if series.entity_id != model.entity_id:
        raise DataError(f"series {series.entity_id} paired with model {model.entity_id}")
    cum: dict[int, float] = {}
    running = 0.0
    for year in range(series.t_first, series.t_last_observed + 1):
        running += series.counts.get(year, 0)
        cum[year] = running
    tail = sum(evaluate(model, t) for t in range(year_max + 1, model.t_end + 1))
    return EntityTimeline(
        entity_id=series.entity_id,
        t_start=series.t_first,
        t_end=max(model.t_end, series.t_last_observed),
        cum_observed=cum,
        lifetime_total=running + tail,
    )


def lifetime_ratio(timeline: EntityTimeline, t0: int) -> float:
    """Fraction of the entity's lifetime document mass accumulated by t0."""
    ratio = timeline.cum(t0) / timeline.lifetime_total
    return min(max(ratio, 0.0), 1.0)


def freshness(timeline: EntityTimeline, t0: int) -> float:
    """Complement of the lifetime ratio; 1 at birth, 0 once the lifetime is spent."""
    return 1.0 - lifetime_ratio(timeline, t0)


def informativity_weights(
    doc: DocumentRecord,
    entities: Sequence[EntityTimeline],
    degenerate_weight: float = 1.0,
) -> dict[str, float]:
    """Range-normalized informativity of each entity in one title.

    The more documents an entity has accumulated by the title's year, the
    less informative it is. A degenerate range (single entity, or all
    cumulative counts equal) gives every entity ``degenerate_weight``.
    """
    if not entities:
        return {}
    dfs = {tl.entity_id: tl.cum(doc.year) for tl in entities}
    df_min, df_max = min(dfs.values()), max(dfs.values())
    if df_max == df_min:
        return {entity_id: degenerate_weight for entity_id in dfs}
    span = df_max - df_min
    return {entity_id: 1.0 - (df - df_min) / span for entity_id, df in dfs.items()}


@dataclass(frozen=True)
class FiceResult:
    """Per-quota FICE plus its three ablation baselines."""

    quota_id: str
    year_span: str
    fice: float
    dichotomous: int
    weight_only: float
    ratio_only: float
    mean_c5: float
    fice_stddev: float

    def __post_init__(self):
        for name in ("fice", "weight_only", "ratio_only", "mean_c5", "fice_stddev"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DataError(f"{self.quota_id}: {name} must be finite and non-negative")
        if self.dichotomous < 0:
            raise DataError(f"{self.quota_id}: dichotomous must be non-negative")


def c5(citations: CitationRecord | None, y: int) -> int:
    """Citations accumulated in years y through y+4; missing years count 0."""
    if citations is None:
        return 0
    return sum(citations.per_year.get(t, 0) for t in range(y, y + 5))


def document_fice(
    doc: DocumentRecord,
    timelines: Sequence[EntityTimeline],
    degenerate_weight: float = 1.0,
) -> tuple[float, float, float]:
    """One document's (fice, weight_only, ratio_only) contributions."""
    weights = informativity_weights(doc, timelines, degenerate_weight)
    fice_sum = weight_sum = fresh_sum = 0.0
    for timeline in timelines:
        fresh = freshness(timeline, doc.year)
        fice_sum += weights[timeline.entity_id] * fresh
        weight_sum += weights[timeline.entity_id]
        fresh_sum += fresh
    return fice_sum, weight_sum, fresh_sum


def quota_metrics(
    quota_id: str,
    docs: Sequence[DocumentRecord],
    entities_by_doc: Mapping[str, Sequence[str]],
    timelines: Mapping[str, EntityTimeline],
    citations: Mapping[str, CitationRecord] | None = None,
    c5_year: int | None = None,
    degenerate_weight: float = 1.0,
) -> FiceResult:
    """Aggregate FICE and its baselines over one quota of documents.

    Entity ids missing from ``timelines`` (excluded by the fitting stage)
    contribute nothing to any metric and are reported once per quota.
    ``c5_year`` fixes the citation window start; by default each document
    uses its own publication year.
    """
    if not docs:
        raise DataError(f"{quota_id}: empty quota")
    fice_total = weight_total = fresh_total = 0.0
    seen_entities: set[str] = set()
    missing: set[str] = set()
    doc_fices = []
    c5_values = []
    for doc in docs:
        doc_timelines = []
        for entity_id in entities_by_doc.get(doc.doc_id, ()):
            timeline = timelines.get(entity_id)
            if timeline is None:
                missing.add(entity_id)
                continue
            doc_timelines.append(timeline)
            seen_entities.add(entity_id)
        doc_fice, doc_weight, doc_fresh = document_fice(doc, doc_timelines, degenerate_weight)
        doc_fices.append(doc_fice)
        fice_total += doc_fice
        weight_total += doc_weight
        fresh_total += doc_fresh
        if citations is not None:
            c5_values.append(c5(citations.get(doc.doc_id), c5_year if c5_year is not None else doc.year))
    if missing:
        log.warning(
            "%s: %d entities lack fitted timelines and contribute 0: %s",
            quota_id, len(missing), ", ".join(sorted(missing)[:5]),
        )
    mean = sum(doc_fices) / len(doc_fices)
    stddev = math.sqrt(sum((v - mean) ** 2 for v in doc_fices) / len(doc_fices))
    years = [doc.year for doc in docs]
    return FiceResult(
        quota_id=quota_id,
        year_span=f"{min(years)}-{max(years)}",
        fice=fice_total,
        dichotomous=len(seen_entities),
        weight_only=weight_total,
        ratio_only=fresh_total,
        mean_c5=(sum(c5_values) / len(c5_values)) if c5_values else 0.0,
        fice_stddev=stddev,
    )


def write_metrics_csv(results: Iterable[FiceResult]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRICS_HEADER.split(","))
    for r in results:
        writer.writerow(
            [
                r.quota_id,
                r.year_span,
                f"{r.fice:.12g}",
                r.dichotomous,
                f"{r.weight_only:.12g}",
                f"{r.ratio_only:.12g}",
                f"{r.mean_c5:.12g}",
                f"{r.fice_stddev:.12g}",
            ]
        )
    return buffer.getvalue()


def read_metrics_csv(text: str) -> list[FiceResult]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != METRICS_HEADER.split(","):
        raise DataError(f"metrics CSV: unexpected header {header}")
    results = []
    for row in reader:
        if len(row) != 8:
            raise DataError(f"metrics CSV: expected 8 columns, got {len(row)}")
        results.append(
            FiceResult(
                quota_id=row[0],
                year_span=row[1],
                fice=float(row[2]),
                dichotomous=int(row[3]),
                weight_only=float(row[4]),
                ratio_only=float(row[5]),
                mean_c5=float(row[6]),
                fice_stddev=float(row[7]),
            )
        )
    return results
