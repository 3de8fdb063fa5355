"""Document-frequency curves: per-entity yearly counts fitted by a sum of
Gaussian profiles, enabling prediction beyond the observable period.

The fitter optimizes mean squared error plus a regularizer that penalizes
excessively large or narrow peaks. Amplitude and dispersion are optimized in
log-space, so their positivity invariants hold by construction. The number
of profiles is inferred from the data by neighboring-value peak detection,
one profile per detected peak.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ._validation import paired_1d
from .corpus import YEAR_MAX, YEAR_MIN, CorpusIndex
from .errors import DataError, FitError, PathologicalFitError

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

SIGMA_MIN = 0.5          # floor for initial dispersion; reference width in the regularizer
T_END_SCAN_YEARS = 300   # lifetime-end scan cap past the first appearance


@dataclass(frozen=True)
class GaussianProfile:
    """One Gaussian component: amplitude (documents), mean (year), dispersion (years)."""

    amplitude: float
    mean: float
    dispersion: float

    def __post_init__(self):
        if not self.amplitude > 0:
            raise DataError(f"amplitude must be positive, got {self.amplitude}")
        if not self.dispersion > 0:
            raise DataError(f"dispersion must be positive, got {self.dispersion}")


@dataclass(frozen=True)
class DfSeries:
    """Observed year -> document count series for one entity."""

    entity_id: str
    counts: Mapping[int, int]
    t_first: int
    t_last_observed: int


@dataclass(frozen=True)
class DfModel:
    """Fitted Gaussian-mixture document-frequency curve."""

    entity_id: str
    profiles: tuple[GaussianProfile, ...]
    final_loss: float
    t_end: int


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the curve fitter; defaults suit yearly document counts."""

    learning_rate: float = 0.05
    max_epochs: int = 5000
    patience: int = 100
    improvement_tol: float = 1e-6
    reg_narrow: float = 0.01
    reg_amplitude: float = 0.001
    amp_init_range: tuple[float, float] = (0.5, 1.5)
    rng_seed: int = 0

    def __post_init__(self):
        low, high = self.amp_init_range
        if not 0 < low < high:
            raise DataError(f"amp_init_range must satisfy 0 < low < high, got {self.amp_init_range}")
        for name in ("learning_rate", "max_epochs", "patience", "improvement_tol"):
            if not getattr(self, name) > 0:
                raise DataError(f"{name} must be positive")
        if self.reg_narrow < 0 or self.reg_amplitude < 0:
            raise DataError("regularization weights must be non-negative")


def make_series(entity_id: str, counts: Mapping[int, int]) -> DfSeries:
    """Validate and build a DfSeries from a year -> count map."""
    positive = {}
    for year, count in counts.items():
        if count < 0:
            raise DataError(f"{entity_id}: negative count in {year}")
        if not YEAR_MIN <= year <= YEAR_MAX:
            raise DataError(f"{entity_id}: year {year} outside [{YEAR_MIN}, {YEAR_MAX}]")
        if count > 0:
            positive[int(year)] = int(count)
    if not positive:
        raise DataError(f"{entity_id}: series has no positive counts")
    return DfSeries(
        entity_id=entity_id,
        counts=positive,
        t_first=min(positive),
        t_last_observed=max(positive),
    )


def dense_counts(series: DfSeries) -> tuple[np.ndarray, np.ndarray]:
    """Materialize the series on its full year range, zeros filled in.

    Absence of the entity in a year is a real observation, not missing data.
    """
    years = np.arange(series.t_first, series.t_last_observed + 1)
    values = np.array([series.counts.get(int(y), 0) for y in years], dtype=float)
    return years, values


def build_df_series(index: CorpusIndex, mapping: Mapping[str, str]) -> list[DfSeries]:
    """Count, per entity and year, the distinct documents mentioning it.

    A document counts once per entity per year regardless of repeated
    mentions or multiple member surfaces appearing in the same title.
    """
    docs_seen: dict[str, dict[int, set[str]]] = {}
    for doc in index.documents:
        for mention in index.mentions(doc.doc_id):
            try:
                entity_id = mapping[mention.surface]
            except KeyError:
                raise DataError(f"surface {mention.surface!r} missing from entity mapping")
            docs_seen.setdefault(entity_id, {}).setdefault(doc.year, set()).add(doc.doc_id)
    return [
        make_series(entity_id, {year: len(ids) for year, ids in by_year.items()})
        for entity_id, by_year in sorted(docs_seen.items())
    ]


# ---------------------------------------------------------------------------
# Peak detection and initialization
# ---------------------------------------------------------------------------


def detect_peaks(values) -> list[int]:
    """Indices of local maxima by neighboring-value comparison.

    Plateaus (runs of equal values exceeding both neighbors) report their
    leftmost index; endpoints are never peaks. If no interior peak exists
    the single leftmost global maximum is returned instead.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise DataError("peak detection needs a non-empty 1-D array")
    n = vals.size
    peaks: list[int] = []
    start = 0
    while start < n:
        end = start
        while end + 1 < n and vals[end + 1] == vals[start]:
            end += 1
        if start > 0 and end < n - 1 and vals[start] > vals[start - 1] and vals[start] > vals[end + 1]:
            peaks.append(start)
        start = end + 1
    if not peaks:
        peaks = [int(np.argmax(vals))]
    return peaks


def _init_parameters(
    years: np.ndarray,
    values: np.ndarray,
    peaks: list[int],
    amp_low: float,
    amp_high: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    max_count = float(values.max())
    span = float(years.max() - years.min())
    dispersion = max(span / len(peaks), SIGMA_MIN)
    amplitudes = rng.uniform(amp_low * max_count, amp_high * max_count, size=len(peaks))
    means = years[peaks].astype(float)
    dispersions = np.full(len(peaks), dispersion)
    return amplitudes, means, dispersions


def init_profiles(series: DfSeries, peaks: list[int], config: FitConfig) -> list[GaussianProfile]:
    """Unfitted profiles: one per detected peak, seeded amplitude draw."""
    if not peaks:
        raise DataError("init_profiles needs at least one peak")
    years, values = dense_counts(series)
    rng = np.random.default_rng(config.rng_seed)
    amps, means, disps = _init_parameters(
        years, values, peaks, config.amp_init_range[0], config.amp_init_range[1], rng
    )
    return [GaussianProfile(float(a), float(m), float(s)) for a, m, s in zip(amps, means, disps)]


# ---------------------------------------------------------------------------
# Curve evaluation
# ---------------------------------------------------------------------------


def _profile_arrays(model) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    profiles = model.profiles if isinstance(model, DfModel) else tuple(model)
    amps = np.array([p.amplitude for p in profiles])
    means = np.array([p.mean for p in profiles])
    disps = np.array([p.dispersion for p in profiles])
    return amps, means, disps


def evaluate(model, t):
    """Predicted document frequency at year(s) t: sum of Gaussian profiles."""
    amps, means, disps = _profile_arrays(model)
    t_arr = np.asarray(t, dtype=float)
    out = np.sum(
        amps * np.exp(-((t_arr[..., None] - means) ** 2) / (2.0 * disps**2)),
        axis=-1,
    )
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Loss and gradients (log-space amplitude / dispersion)
# ---------------------------------------------------------------------------


def loss_and_grad(
    theta: np.ndarray,
    years: np.ndarray,
    values: np.ndarray,
    max_count: float,
    reg_narrow: float,
    reg_amplitude: float,
) -> tuple[float, np.ndarray]:
    """Total loss (MSE + regularization) and its gradient.

    ``theta`` packs, per profile: log amplitude, mean, log dispersion.
    The regularizer penalizes sub-half-year widths and amplitudes far above
    the observed maximum count.
    """
    k = theta.size // 3
    # Overflow here means a diverged fit; it is reported via FitError, not a warning.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        log_amp, means, log_disp = theta[:k], theta[k:2 * k], theta[2 * k:]
        amps = np.exp(log_amp)
        disps = np.exp(log_disp)

        delta = years[:, None] - means[None, :]
        gauss = amps[None, :] * np.exp(-(delta**2) / (2.0 * disps[None, :] ** 2))
        fitted = gauss.sum(axis=1)
        residual = fitted - values
        n = years.size

        mse = float(np.mean(residual**2))
        reg = reg_narrow * float(np.sum((SIGMA_MIN / disps) ** 2)) + reg_amplitude * float(
            np.sum((amps / max_count) ** 2)
        )

        scale = 2.0 / n
        grad_log_amp = scale * (residual[:, None] * gauss).sum(axis=0)
        grad_means = scale * (residual[:, None] * gauss * delta / disps[None, :] ** 2).sum(axis=0)
        grad_log_disp = scale * (residual[:, None] * gauss * delta**2 / disps[None, :] ** 2).sum(axis=0)

        grad_log_amp += 2.0 * reg_amplitude * (amps / max_count) ** 2
        grad_log_disp += -2.0 * reg_narrow * (SIGMA_MIN / disps) ** 2

        return mse + reg, np.concatenate([grad_log_amp, grad_means, grad_log_disp])


# ---------------------------------------------------------------------------
# Estimator
# ---------------------------------------------------------------------------


class GaussianMixtureCurve(BaseEstimator, RegressorMixin):
    """Sum-of-Gaussians curve regressor with data-driven component count.

    One component per detected peak in y (ordered by X); parameters are
    optimized by full-batch ADAM on MSE plus the large/narrow-peak
    regularizer. Fixing ``rng_seed`` makes fits deterministic.

    Attributes after fit: ``amplitudes_``, ``means_``, ``dispersions_``,
    ``final_loss_``, ``n_epochs_``, ``loss_curve_``, ``profiles_``.
    """

    def __init__(
        self,
        learning_rate=0.05,
        max_epochs=5000,
        patience=100,
        improvement_tol=1e-6,
        reg_narrow=0.01,
        reg_amplitude=0.001,
        amp_init_low=0.5,
        amp_init_high=1.5,
        rng_seed=0,
    ):
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.improvement_tol = improvement_tol
        self.reg_narrow = reg_narrow
        self.reg_amplitude = reg_amplitude
        self.amp_init_low = amp_init_low
        self.amp_init_high = amp_init_high
        self.rng_seed = rng_seed

    def fit(self, X, y):
        years, values = paired_1d(X, y, names=("X", "y"))
        if np.any(values < 0):
            raise DataError("y must be non-negative document counts")
        if values.max() <= 0:
            raise DataError("y must contain at least one positive count")
        order = np.argsort(years)
        years, values = years[order], values[order]

        peaks = detect_peaks(values)
        rng = np.random.default_rng(self.rng_seed)
        amps, means, disps = _init_parameters(
            years, values, peaks, self.amp_init_low, self.amp_init_high, rng
        )
        theta = np.concatenate([np.log(amps), means, np.log(disps)])
        max_count = float(values.max())

        m = np.zeros_like(theta)
        v = np.zeros_like(theta)
        best_loss = np.inf
        best_theta = theta.copy()
        streak = 0
        losses: list[float] = []

        epoch = 0
        for epoch in range(1, int(self.max_epochs) + 1):
            loss, grad = loss_and_grad(
                theta, years, values, max_count, self.reg_narrow, self.reg_amplitude
            )
            if not np.isfinite(loss):
                raise FitError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            losses.append(loss)
            if loss < best_loss:
                improvement = np.inf if not np.isfinite(best_loss) else (best_loss - loss) / best_loss
                best_loss = loss
                best_theta = theta.copy()
            else:
                improvement = 0.0
            if improvement < self.improvement_tol:
                streak += 1
                if streak >= self.patience:
                    break
            else:
                streak = 0

            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad**2
            m_hat = m / (1.0 - ADAM_BETA1**epoch)
            v_hat = v / (1.0 - ADAM_BETA2**epoch)
            theta = theta - self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

        k = len(peaks)
        self.amplitudes_ = np.exp(best_theta[:k])
        self.means_ = best_theta[k:2 * k].copy()
        self.dispersions_ = np.exp(best_theta[2 * k:])
        self.final_loss_ = float(best_loss)
        self.n_epochs_ = epoch
        self.loss_curve_ = np.array(losses)
        return self

    @property
    def profiles_(self) -> tuple[GaussianProfile, ...]:
        self._check_fitted()
        return tuple(
            GaussianProfile(float(a), float(m), float(s))
            for a, m, s in zip(self.amplitudes_, self.means_, self.dispersions_)
        )

    def predict(self, X):
        self._check_fitted()
        years = np.asarray(X, dtype=float)
        if years.ndim == 2 and years.shape[1] == 1:
            years = years[:, 0]
        return evaluate(self.profiles_, years)

    def _check_fitted(self):
        if not hasattr(self, "final_loss_"):
            raise NotFittedError("this GaussianMixtureCurve instance is not fitted yet")


# ---------------------------------------------------------------------------
# Pipeline-facing fit and lifetime-end prediction
# ---------------------------------------------------------------------------


def derive_seed(base_seed: int, entity_id: str) -> int:
    """Stable per-entity seed so fits don't depend on scheduling order."""
    digest = hashlib.sha256(f"{base_seed}:{entity_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def predict_t_end(model, t_last_observed: int, t_first: int) -> int:
    """First year at/after the curve's tail where predicted df drops below 1.

    The scan starts at the later of the last observed year and the last
    profile mean (so a pre-peak dip cannot end the lifetime early) and is
    capped 300 years past the first appearance.
    """
    amps, means, _ = _profile_arrays(model)
    start = max(int(t_last_observed), int(np.ceil(means.max())))
    cap = int(t_first) + T_END_SCAN_YEARS
    for t in range(start, cap + 1):
        if evaluate(model, t) < 1.0:
            return t
    raise PathologicalFitError(
        f"predicted document frequency never drops below 1 within {cap}"
    )


def _total_loss(profiles, years, values, config: FitConfig) -> float:
    amps, means, disps = _profile_arrays(profiles)
    theta = np.concatenate([np.log(amps), means, np.log(disps)])
    loss, _ = loss_and_grad(
        theta, years, values.astype(float), float(values.max()),
        config.reg_narrow, config.reg_amplitude,
    )
    return loss


def fit_series(series: DfSeries, config: FitConfig = FitConfig()) -> DfModel:
    """Fit one entity's curve and determine its lifetime end.

    Single-data-point series skip optimization; fitting them is ill-posed,
    so the model is one profile of width 0.5 centered on the lone year.
    Raises PathologicalFitError when the fitted curve never decays; callers
    exclude such entities from downstream metrics with a warning.
    """
    years, values = dense_counts(series)
    seed = derive_seed(config.rng_seed, series.entity_id)
    if years.size == 1:
        profiles = (GaussianProfile(float(values[0]), float(years[0]), SIGMA_MIN),)
        final_loss = _total_loss(profiles, years, values, config)
    else:
        estimator = GaussianMixtureCurve(
            learning_rate=config.learning_rate,
            max_epochs=config.max_epochs,
            patience=config.patience,
            improvement_tol=config.improvement_tol,
            reg_narrow=config.reg_narrow,
            reg_amplitude=config.reg_amplitude,
            amp_init_low=config.amp_init_range[0],
            amp_init_high=config.amp_init_range[1],
            rng_seed=seed,
        ).fit(years, values)
        profiles = estimator.profiles_
        final_loss = estimator.final_loss_
    t_end = predict_t_end(profiles, series.t_last_observed, series.t_first)
    return DfModel(
        entity_id=series.entity_id,
        profiles=tuple(profiles),
        final_loss=final_loss,
        t_end=t_end,
    )


# ---------------------------------------------------------------------------
# Model serialization (fit cache)
# ---------------------------------------------------------------------------


def model_to_dict(model: DfModel) -> dict:
    return {
        "entity_id": model.entity_id,
        "profiles": [
            {"amplitude": p.amplitude, "mean": p.mean, "dispersion": p.dispersion}
            for p in model.profiles
        ],
        "final_loss": model.final_loss,
        "t_end": model.t_end,
    }


def model_from_dict(data: dict) -> DfModel:
    return DfModel(
        entity_id=data["entity_id"],
        profiles=tuple(
            GaussianProfile(p["amplitude"], p["mean"], p["dispersion"])
            for p in data["profiles"]
        ),
        final_loss=float(data["final_loss"]),
        t_end=int(data["t_end"]),
    )


def dump_models(models: Iterable[DfModel]) -> str:
    ordered = sorted(models, key=lambda m: m.entity_id)
    return json.dumps([model_to_dict(m) for m in ordered], indent=2)


def load_models(text: str) -> dict[str, DfModel]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"models file: invalid JSON ({exc.msg})") from exc
    models = [model_from_dict(item) for item in data]
    return {m.entity_id: m for m in models}
