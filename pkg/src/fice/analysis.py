"""Quota binning, rank correlation, and plot-ready trend tables.

Documents are grouped into fixed-size quotas either chronologically or by
ascending 5-year citation count; per-quota aggregates feed linear and
polynomial trend fits and a Spearman correlation with average-rank ties.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.stats

from ._validation import paired_1d
from .corpus import CitationRecord, CorpusIndex
from .errors import DataError
from .metrics import c5

log = logging.getLogger(__name__)

TREND_HEADER = "year,quota_size,extent_disambiguated,extent_undisambiguated,poly_fit_value"
CORRELATION_HEADER = "bin,log_mean_c5,mean_fice,stddev"

EXACT_P_MAX_N = 10


@dataclass(frozen=True)
class QuotaBin:
    """A fixed-size group of documents aggregated as one unit."""

    quota_id: str
    members: tuple[str, ...]
    ordering_key: str

    def __post_init__(self):
        if not self.members:
            raise DataError(f"{self.quota_id}: empty quota bin")
        if len(set(self.members)) != len(self.members):
            raise DataError(f"{self.quota_id}: duplicate doc_ids in bin")
        if self.ordering_key not in ("chronological", "c5_rank"):
            raise DataError(f"{self.quota_id}: unknown ordering key {self.ordering_key!r}")


@dataclass(frozen=True)
class CorrelationReport:
    """Spearman coefficient with its two-sided p-value."""

    rho: float
    p_value: float
    n: int

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise DataError(f"rho {self.rho} outside [-1, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise DataError(f"p-value {self.p_value} outside [0, 1]")


def bin_chronological(index: CorpusIndex, q: int) -> list[QuotaBin]:
    """Consecutive full bins of q documents in publication order.

    A trailing partial bin is dropped; a quota larger than the corpus
    yields no bins at all.
    """
    if q < 1:
        raise DataError(f"quota size must be positive, got {q}")
    docs = index.documents
    n_bins = len(docs) // q
    if n_bins == 0:
        log.warning("quota size %d exceeds corpus size %d; no bins", q, len(docs))
        return []
    return [
        QuotaBin(
            quota_id=f"chron-{q}-{i:03d}",
            members=tuple(d.doc_id for d in docs[i * q:(i + 1) * q]),
            ordering_key="chronological",
        )
        for i in range(n_bins)
    ]


def bin_by_c5(
    index: CorpusIndex,
    citations: Mapping[str, CitationRecord],
    q: int,
    base_year: int,
) -> list[QuotaBin]:
    """Full bins of q documents sorted by ascending C5(base_year), ties by id."""
    if q < 1:
        raise DataError(f"quota size must be positive, got {q}")
    ranked = sorted(
        index.documents,
        key=lambda d: (c5(citations.get(d.doc_id), base_year), d.doc_id),
    )
    n_bins = len(ranked) // q
    if n_bins == 0:
        log.warning("quota size %d exceeds corpus size %d; no bins", q, len(ranked))
        return []
    return [
        QuotaBin(
            quota_id=f"c5-{q}-{i:03d}",
            members=tuple(d.doc_id for d in ranked[i * q:(i + 1) * q]),
            ordering_key="c5_rank",
        )
        for i in range(n_bins)
    ]


# ---------------------------------------------------------------------------
# Spearman correlation
# ---------------------------------------------------------------------------


def average_ranks(values) -> np.ndarray:
    """Ranks 1..n with tied values sharing the mean of their positions."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=float)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_p_value(rx: np.ndarray, ry: np.ndarray, rho_obs: float) -> float:
    """Two-sided permutation p-value over all orderings of the y ranks.

    With rank means and spreads fixed under permutation, |rho| >= |rho_obs|
    reduces to a threshold on |sum(rx * ry_perm) - n*mx*my|.
    """
    n = rx.size
    if n > EXACT_P_MAX_N:
        raise DataError(f"exact p-value limited to n <= {EXACT_P_MAX_N}, got {n}")
    center = n * rx.mean() * ry.mean()
    scale = n * rx.std() * ry.std()
    threshold = (abs(rho_obs) - 1e-12) * scale
    count = 0
    total = 0
    chunk = []
    for perm in itertools.permutations(ry):
        chunk.append(perm)
        if len(chunk) == 65536:
            sums = np.asarray(chunk) @ rx
            count += int(np.count_nonzero(np.abs(sums - center) >= threshold))
            total += len(chunk)
            chunk = []
    if chunk:
        sums = np.asarray(chunk) @ rx
        count += int(np.count_nonzero(np.abs(sums - center) >= threshold))
        total += len(chunk)
    return count / total


def spearman(x, y, p_method: str = "t") -> CorrelationReport:
    """Spearman rank correlation with average-rank ties.

    The two-sided p-value uses the t-distribution approximation
    t = rho * sqrt((n-2) / (1-rho^2)) on n-2 degrees of freedom;
    ``p_method="exact"`` enumerates all rank permutations instead
    (practical only for small n).
    """
    x_arr, y_arr = paired_1d(x, y, names=("x", "y"))
    n = x_arr.size
    if n < 3:
        raise DataError(f"spearman needs at least 3 points, got {n}")
    if np.all(x_arr == x_arr[0]) or np.all(y_arr == y_arr[0]):
        raise DataError("spearman undefined for a constant input vector")
    if p_method not in ("t", "exact"):
        raise DataError(f"unknown p-value method {p_method!r}")

    rx, ry = average_ranks(x_arr), average_ranks(y_arr)
    rho = float(np.corrcoef(rx, ry)[0, 1])
    rho = min(max(rho, -1.0), 1.0)

    if abs(rho) == 1.0:
        p_value = 0.0
    elif p_method == "exact":
        p_value = _exact_p_value(rx, ry, rho)
    else:
        t_stat = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p_value = 2.0 * float(scipy.stats.t.sf(abs(t_stat), df=n - 2))
    return CorrelationReport(rho=rho, p_value=min(p_value, 1.0), n=n)


# ---------------------------------------------------------------------------
# Trend fits
# ---------------------------------------------------------------------------


def linear_fit(points) -> tuple[float, float]:
    """Ordinary least squares line; returns (slope, intercept)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise DataError("linear_fit needs at least 2 (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise DataError("linear_fit points must be finite")
    x, y = pts[:, 0], pts[:, 1]
    x_centered = x - x.mean()
    denom = float(np.dot(x_centered, x_centered))
    if denom == 0.0:
        raise DataError("linear_fit undefined when all x are identical")
    slope = float(np.dot(x_centered, y - y.mean()) / denom)
    intercept = float(y.mean() - slope * x.mean())
    return slope, intercept


def polynomial_fit(points, degree: int) -> list[float]:
    """Least-squares polynomial coefficients, lowest order first.

    Solved via normal equations on centered and scaled x for conditioning;
    coefficients are mapped back to the original x variable.
    """
    if degree < 1:
        raise DataError(f"degree must be at least 1, got {degree}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DataError("polynomial_fit needs (x, y) points")
    if pts.shape[0] <= degree:
        raise DataError(f"{pts.shape[0]} points cannot determine degree {degree}")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size <= degree:
        raise DataError(f"need more than {degree} distinct x values")
    mean = float(x.mean())
    scale = float(x.std()) or 1.0
    z = (x - mean) / scale
    vander = np.vander(z, degree + 1, increasing=True)
    try:
        beta = np.linalg.solve(vander.T @ vander, vander.T @ y)
    except np.linalg.LinAlgError as exc:
        raise DataError("polynomial fit is underdetermined") from exc
    poly_x = np.polynomial.Polynomial(beta)(
        np.polynomial.Polynomial([-mean / scale, 1.0 / scale])
    )
    coeffs = list(map(float, poly_x.coef))
    return coeffs + [0.0] * (degree + 1 - len(coeffs))


# ---------------------------------------------------------------------------
# Plot-ready tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrendRow:
    """One chronological quota's extents plus the fitted-curve value."""

    year: int
    quota_size: int
    extent_disambiguated: int
    extent_undisambiguated: int
    poly_fit_value: float


def trend_table(
    index: CorpusIndex,
    entities_by_doc: Mapping[str, Sequence[str]],
    surfaces_by_doc: Mapping[str, Sequence[str]],
    quota_sizes: Sequence[int],
    poly_degree: int = 3,
) -> list[TrendRow]:
    """Distinct-entity counts per chronological quota for each quota size.

    ``entities_by_doc`` holds disambiguated ids; ``surfaces_by_doc`` the raw
    surfaces. The polynomial column fits the disambiguated extent against
    the quota year, falling back to a linear fit when too few quotas exist.
    """
    rows: list[TrendRow] = []
    for q in sorted(quota_sizes):
        bins = bin_chronological(index, q)
        if not bins:
            continue
        years = [index.document(b.members[0]).year for b in bins]
        disamb = [
            len({e for doc_id in b.members for e in entities_by_doc.get(doc_id, ())})
            for b in bins
        ]
        undisamb = [
            len({s for doc_id in b.members for s in surfaces_by_doc.get(doc_id, ())})
            for b in bins
        ]
        points = list(zip(years, disamb))
        degree = min(poly_degree, len({y for y in years}) - 1)
        if degree >= 1:
            coeffs = polynomial_fit(points, degree)
            fitted = [
                float(sum(c * y**k for k, c in enumerate(coeffs))) for y in years
            ]
        else:
            fitted = [float(v) for v in disamb]
        rows.extend(
            TrendRow(year, q, d, u, f)
            for year, d, u, f in zip(years, disamb, undisamb, fitted)
        )
    return rows


def write_trend_csv(rows: Iterable[TrendRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TREND_HEADER.split(","))
    for r in rows:
        writer.writerow(
            [r.year, r.quota_size, r.extent_disambiguated,
             r.extent_undisambiguated, f"{r.poly_fit_value:.12g}"]
        )
    return buffer.getvalue()


def slope_grid(rows: Sequence[TrendRow], split_year: int) -> list[dict]:
    """Linear-fit slopes of the disambiguated extent on two year ranges.

    One slope per (period, quota size) cell; the split year belongs to both
    ranges so each side has a shared anchor point.
    """
    grid = []
    quota_sizes = sorted({r.quota_size for r in rows})
    for q in quota_sizes:
        q_rows = [r for r in rows if r.quota_size == q]
        year_lo = min(r.year for r in q_rows)
        year_hi = max(r.year for r in q_rows)
        for period, lo, hi in (
            (f"{year_lo}-{split_year}", year_lo, split_year),
            (f"{split_year}-{year_hi}", split_year, year_hi),
        ):
            pts = [(r.year, r.extent_disambiguated) for r in q_rows if lo <= r.year <= hi]
            if len(pts) >= 2 and len({p[0] for p in pts}) >= 2:
                slope, _ = linear_fit(pts)
            else:
                slope = float("nan")
            grid.append({"period": period, "quota_size": q, "slope": slope})
    return grid


@dataclass(frozen=True)
class CorrelationRow:
    """One citation-ranked bin: log mean C5 against the mean metric value."""

    bin_id: str
    log_mean_c5: float
    mean_value: float
    stddev: float


def correlation_rows(
    bins: Sequence[QuotaBin],
    doc_values: Mapping[str, float],
    doc_c5: Mapping[str, float],
) -> list[CorrelationRow]:
    """Per-bin aggregates for the citation correlation plot.

    Bins whose mean C5 is zero have no defined log coordinate; they are
    excluded with a warning.
    """
    rows = []
    for b in bins:
        c5_values = [doc_c5.get(doc_id, 0.0) for doc_id in b.members]
        values = [doc_values.get(doc_id, 0.0) for doc_id in b.members]
        mean_c5 = sum(c5_values) / len(c5_values)
        if mean_c5 <= 0.0:
            log.warning("%s: mean C5 is 0; excluded from log-scale output", b.quota_id)
            continue
        mean_value = sum(values) / len(values)
        stddev = math.sqrt(sum((v - mean_value) ** 2 for v in values) / len(values))
        rows.append(
            CorrelationRow(
                bin_id=b.quota_id,
                log_mean_c5=math.log10(mean_c5),
                mean_value=mean_value,
                stddev=stddev,
            )
        )
    return rows


def correlate_rows(rows: Sequence[CorrelationRow], p_method: str = "t") -> CorrelationReport:
    """Spearman between the bins' log mean C5 and mean metric value."""
    return spearman(
        [r.log_mean_c5 for r in rows], [r.mean_value for r in rows], p_method=p_method
    )


def write_correlation_csv(rows: Iterable[CorrelationRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CORRELATION_HEADER.split(","))
    for r in rows:
        writer.writerow(
            [r.bin_id, f"{r.log_mean_c5:.12g}", f"{r.mean_value:.12g}", f"{r.stddev:.12g}"]
        )
    return buffer.getvalue()
