"""Freshness and informativity weighted cognitive extent (FICE) toolkit.

Models each scientific entity's lifetime as a Gaussian-mixture document
frequency curve, derives freshness and informativity weights, aggregates
FICE per fixed-size document quota, and correlates it with 5-year
cumulative citation counts.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    CitationRecord,
    CorpusIndex,
    DocumentRecord,
    EntityMention,
    build_index,
    load_citations,
    load_entities,
    parse_bibtex,
)
from .disambig import CanonicalEntity, conflate, fallback_similarity  # noqa: F401
from .dfcurve import (  # noqa: F401
    DfModel,
    DfSeries,
    FitConfig,
    GaussianMixtureCurve,
    GaussianProfile,
    build_df_series,
    detect_peaks,
    evaluate,
    fit_series,
    predict_t_end,
)
from .metrics import (  # noqa: F401
    EntityTimeline,
    FiceResult,
    build_timeline,
    c5,
    freshness,
    informativity_weights,
    lifetime_ratio,
    quota_metrics,
)
from .analysis import (  # noqa: F401
    CorrelationReport,
    QuotaBin,
    bin_by_c5,
    bin_chronological,
    linear_fit,
    polynomial_fit,
    spearman,
)
from .citations import CitationsClient, ClientConfig, TokenBucket  # noqa: F401
from .synth import GeneratorSpec, SynthCorpus, generate_corpus  # noqa: F401
