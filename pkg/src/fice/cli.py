"""Command-line pipeline: staged file artifacts from BibTeX to correlation.

Each subcommand reads its upstream artifacts from the output directory,
writes its own outputs plus a run manifest (config digest and input/output
digests, no timestamps), and is idempotent for unchanged inputs and seeds.

Exit codes: 0 success, 1 usage, 2 data error, 3 network error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .analysis import (
    bin_by_c5,
    bin_chronological,
    correlate_rows,
    correlation_rows,
    slope_grid,
    trend_table,
    write_correlation_csv,
    write_trend_csv,
)
from .citations import (
    CitationsClient,
    ClientConfig,
    api_key_from_env,
    load_id_mapping,
    write_citations_file,
)
from .corpus import (
    CorpusIndex,
    build_index,
    dump_corpus,
    load_citations,
    load_corpus,
    load_entities,
    parse_bibtex,
    year_report,
)
from .dfcurve import (
    FitConfig,
    build_df_series,
    dump_models,
    fit_series,
    load_models,
)
from .disambig import (
    conflate,
    dump_mapping,
    enumerate_pairs,
    load_mapping,
    read_scores,
    score_pairs,
)
from .errors import DataError, FitError, NetworkError, PathologicalFitError, UsageError
from .metrics import c5, build_timeline, document_fice, quota_metrics, write_metrics_csv
from .synth import GeneratorSpec, generate_corpus

log = logging.getLogger(__name__)

DEFAULT_QUOTA_SIZES = (125, 250, 500)
METHOD_ORDER = ("dichotomous", "weight_only", "ratio_only", "fice")


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved configuration: defaults, then config file, then flags."""

    bibtex: str | None = None
    entities: str | None = None
    scores: str | None = None
    citations_file: str | None = None
    id_mapping: str | None = None
    offline_fixture: str | None = None
    out_dir: str = "out"
    cache_dir: str = ".fice-cache"
    quota_sizes: tuple[int, ...] = DEFAULT_QUOTA_SIZES
    threshold: float = 0.5
    base_year: int = 2015
    seed: int = 0
    split_year: int = 2000
    poly_degree: int = 3
    degenerate_weight: float = 1.0
    p_method: str = "t"
    pair_quota: int | None = None
    workers: int | None = None
    offline: bool = False
    force_refetch: bool = False
    fit: FitConfig = FitConfig()
    client_base_url: str = "https://api.semanticscholar.org"
    client_rps: float = 1.0
    client_max_retries: int = 3
    synth_entities: int = 40
    synth_year_start: int = 1990
    synth_year_end: int = 2020
    synth_profiles: int = 1

    def __post_init__(self):
        if not self.quota_sizes or any(q < 1 for q in self.quota_sizes):
            raise UsageError("quota sizes must be positive integers")
        if not 0.0 <= self.threshold <= 1.0:
            raise UsageError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.p_method not in ("t", "exact"):
            raise UsageError(f"p_method must be 't' or 'exact', got {self.p_method!r}")

    def digest(self) -> str:
        payload = dataclasses.asdict(self)
        payload["fit"] = dataclasses.asdict(self.fit)
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()
        ).hexdigest()


_CONFIG_SECTIONS = {
    "paths": {
        "bibtex", "entities", "scores", "citations_file", "id_mapping",
        "offline_fixture", "out_dir", "cache_dir",
    },
    "pipeline": {
        "quota_sizes", "threshold", "base_year", "seed", "split_year",
        "poly_degree", "degenerate_weight", "p_method", "pair_quota", "workers",
    },
    "fit": {
        "learning_rate", "max_epochs", "patience", "improvement_tol",
        "reg_narrow", "reg_amplitude", "rng_seed",
    },
    "client": {"base_url", "requests_per_second", "max_retries"},
    "synth": {"n_entities", "year_start", "year_end", "profiles_per_entity"},
}


def load_config_file(path: Path) -> dict:
    """Flatten a TOML config file into PipelineConfig field overrides."""
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"config file {path} does not exist")
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config file {path}: {exc}")
    overrides: dict = {}
    fit_overrides: dict = {}
    for section, values in data.items():
        allowed = _CONFIG_SECTIONS.get(section)
        if allowed is None:
            raise UsageError(f"config file: unknown section [{section}]")
        if not isinstance(values, dict):
            raise UsageError(f"config file: [{section}] must be a table")
        for key, value in values.items():
            if key not in allowed:
                raise UsageError(f"config file: unknown key {key!r} in [{section}]")
            if section == "fit":
                fit_overrides[key] = value
            elif section == "client":
                overrides[f"client_{'rps' if key == 'requests_per_second' else key}"] = value
            elif section == "synth":
                rename = {
                    "n_entities": "synth_entities",
                    "year_start": "synth_year_start",
                    "year_end": "synth_year_end",
                    "profiles_per_entity": "synth_profiles",
                }
                overrides[rename[key]] = value
            else:
                overrides[key] = value
    if "quota_sizes" in overrides:
        overrides["quota_sizes"] = tuple(int(q) for q in overrides["quota_sizes"])
    if fit_overrides:
        overrides["fit"] = fit_overrides
    return overrides


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    overrides: dict = {}
    if args.config is not None:
        overrides.update(load_config_file(Path(args.config)))

    flag_fields = [
        "bibtex", "entities", "scores", "citations_file", "id_mapping",
        "offline_fixture", "cache_dir", "threshold", "base_year", "seed",
        "split_year", "poly_degree", "degenerate_weight", "p_method",
        "pair_quota", "workers",
    ]
    for name in flag_fields:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "quota", None):
        overrides["quota_sizes"] = tuple(args.quota)
    if getattr(args, "offline", False):
        overrides["offline"] = True
    if getattr(args, "force_refetch", False):
        overrides["force_refetch"] = True
    for flag, field in (
        ("base_url", "client_base_url"),
        ("rps", "client_rps"),
        ("max_retries", "client_max_retries"),
        ("synth_entities", "synth_entities"),
        ("synth_year_start", "synth_year_start"),
        ("synth_year_end", "synth_year_end"),
        ("synth_profiles", "synth_profiles"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value

    fit_overrides = overrides.pop("fit", {})
    if getattr(args, "learning_rate", None) is not None:
        fit_overrides["learning_rate"] = args.learning_rate
    if getattr(args, "max_epochs", None) is not None:
        fit_overrides["max_epochs"] = args.max_epochs
    seed = overrides.get("seed", 0)
    fit_overrides.setdefault("rng_seed", seed)
    try:
        overrides["fit"] = FitConfig(**fit_overrides)
    except TypeError as exc:
        raise UsageError(f"invalid fit configuration: {exc}")
    try:
        return PipelineConfig(**overrides)
    except TypeError as exc:
        raise UsageError(f"invalid configuration: {exc}")


# ---------------------------------------------------------------------------
# Artifact plumbing
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    out_dir: Path,
    stage: str,
    config: PipelineConfig,
    inputs: Mapping[str, Path],
    outputs: Mapping[str, Path],
) -> None:
    manifest = {
        "stage": stage,
        "version": __version__,
        "config_digest": config.digest(),
        "inputs": {name: _sha256(path) for name, path in sorted(inputs.items())},
        "outputs": {name: _sha256(path) for name, path in sorted(outputs.items())},
    }
    path = out_dir / f"{stage}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _require(path: Path, stage: str, produced_by: str) -> Path:
    if not path.exists():
        raise DataError(
            f"{stage}: missing {path.name}; run `fice {produced_by}` first"
        )
    return path


def _out_dir(config: PipelineConfig) -> Path:
    path = Path(config.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_index(out_dir: Path, stage: str) -> CorpusIndex:
    return load_corpus(_require(out_dir / "corpus.json", stage, "ingest").read_text())


def _load_surface_mapping(out_dir: Path, stage: str) -> dict[str, str]:
    _, mapping = load_mapping(
        _require(out_dir / "mapping.csv", stage, "disambiguate").read_text()
    )
    return mapping


def _entities_by_doc(index: CorpusIndex, mapping: Mapping[str, str]) -> dict[str, list[str]]:
    """Distinct, ordered entity ids per document."""
    out: dict[str, list[str]] = {}
    for doc in index.documents:
        ids = {mapping[m.surface] for m in index.mentions(doc.doc_id)}
        if ids:
            out[doc.doc_id] = sorted(ids)
    return out


def _load_citations_artifact(out_dir: Path, config: PipelineConfig):
    """Citations from the pipeline artifact, or the configured file, or None."""
    candidates = [out_dir / "citations.json"]
    if config.citations_file:
        candidates.append(Path(config.citations_file))
    for path in candidates:
        if path.exists():
            return load_citations(path.read_text())
    return None


def _build_timelines(index: CorpusIndex, mapping: Mapping[str, str], out_dir: Path, stage: str):
    models = load_models(_require(out_dir / "models.json", stage, "fit-df").read_text())
    timelines = {}
    for series in build_df_series(index, mapping):
        model = models.get(series.entity_id)
        if model is None:
            continue
        timelines[series.entity_id] = build_timeline(series, model, index.year_max)
    return timelines


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def cmd_ingest(config: PipelineConfig) -> int:
    if not config.bibtex:
        raise UsageError("ingest: --bibtex (or paths.bibtex in the config) is required")
    bib_path = Path(config.bibtex)
    if not bib_path.exists():
        raise DataError(f"ingest: bibtex file {bib_path} does not exist")
    documents, skipped = parse_bibtex(bib_path.read_text())
    inputs = {"bibtex": bib_path}

    mentions = []
    if config.entities:
        entities_path = Path(config.entities)
        if not entities_path.exists():
            raise DataError(f"ingest: entities file {entities_path} does not exist")
        mentions, dropped = load_entities(
            entities_path.read_text().splitlines(),
            known_ids={d.doc_id for d in documents},
        )
        inputs["entities"] = entities_path
        if dropped:
            log.warning("ingest: dropped %d mentions with unknown doc ids", dropped)
    index = build_index(documents, mentions)

    out_dir = _out_dir(config)
    corpus_path = out_dir / "corpus.json"
    corpus_path.write_text(dump_corpus(index, skipped_entries=skipped))
    report_path = out_dir / "year_report.csv"
    lines = ["year,papers,mentions,distinct_surfaces"]
    lines += [f"{y},{p},{m},{s}" for y, p, m, s in year_report(index)]
    report_path.write_text("\n".join(lines) + "\n")

    _write_manifest(out_dir, "ingest", config, inputs,
                    {"corpus.json": corpus_path, "year_report.csv": report_path})
    log.info(
        "ingest: %d documents (%d entries skipped), %d mentions, years %d-%d",
        len(documents), skipped, len(mentions), index.year_min, index.year_max,
    )
    return 0


def cmd_disambiguate(config: PipelineConfig) -> int:
    out_dir = _out_dir(config)
    index = _load_index(out_dir, "disambiguate")
    mentions = list(index.all_mentions())
    if not mentions:
        raise DataError("disambiguate: corpus has no entity mentions; re-run ingest with --entities")

    inputs = {"corpus.json": out_dir / "corpus.json"}
    supplied = None
    if config.scores:
        scores_path = Path(config.scores)
        if not scores_path.exists():
            raise DataError(f"disambiguate: scores file {scores_path} does not exist")
        supplied = read_scores(scores_path.read_text())
        inputs["scores"] = scores_path
    pair_quota = config.pair_quota or max(config.quota_sizes)
    pairs = enumerate_pairs(index, quota=pair_quota)
    scores = score_pairs(pairs, supplied)

    entities, _ = conflate(mentions, scores, config.threshold)
    mapping_path = out_dir / "mapping.csv"
    mapping_path.write_text(dump_mapping(entities))
    _write_manifest(out_dir, "disambiguate", config, inputs, {"mapping.csv": mapping_path})
    log.info("disambiguate: %d surfaces -> %d entities (threshold %.2f)",
             len({m.surface for m in mentions}), len(entities), config.threshold)
    return 0


def _fit_one(series, fit_config):
    """Worker-pool entry: returns (entity_id, model, error_message)."""
    try:
        return series.entity_id, fit_series(series, fit_config), None
    except PathologicalFitError as exc:
        return series.entity_id, None, str(exc)


def cmd_fit_df(config: PipelineConfig) -> int:
    out_dir = _out_dir(config)
    index = _load_index(out_dir, "fit-df")
    mapping = _load_surface_mapping(out_dir, "fit-df")
    series_list = build_df_series(index, mapping)
    if not series_list:
        raise DataError("fit-df: no entity series to fit")

    workers = config.workers or os.cpu_count() or 1
    results = []
    if workers <= 1:
        results = [_fit_one(s, config.fit) for s in series_list]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_one, series_list, [config.fit] * len(series_list)))

    models = [model for _, model, _ in results if model is not None]
    excluded = {eid: err for eid, model, err in results if model is None}
    for entity_id, reason in sorted(excluded.items()):
        log.warning("fit-df: excluding %s (%s)", entity_id, reason)

    models_path = out_dir / "models.json"
    models_path.write_text(dump_models(models) + "\n")
    excluded_path = out_dir / "excluded.json"
    excluded_path.write_text(json.dumps(excluded, indent=2, sort_keys=True) + "\n")
    _write_manifest(
        out_dir, "fit-df", config,
        {"corpus.json": out_dir / "corpus.json", "mapping.csv": out_dir / "mapping.csv"},
        {"models.json": models_path, "excluded.json": excluded_path},
    )
    log.info("fit-df: fitted %d entities (%d excluded) with %d workers",
             len(models), len(excluded), workers)
    return 0


def cmd_metrics(config: PipelineConfig) -> int:
    out_dir = _out_dir(config)
    index = _load_index(out_dir, "metrics")
    mapping = _load_surface_mapping(out_dir, "metrics")
    timelines = _build_timelines(index, mapping, out_dir, "metrics")
    entities_by_doc = _entities_by_doc(index, mapping)
    citations = _load_citations_artifact(out_dir, config)

    results = []
    for q in sorted(config.quota_sizes):
        for bin_ in bin_chronological(index, q):
            docs = [index.document(doc_id) for doc_id in bin_.members]
            results.append(
                quota_metrics(
                    bin_.quota_id, docs, entities_by_doc, timelines,
                    citations=citations,
                    degenerate_weight=config.degenerate_weight,
                )
            )
    if not results:
        raise DataError("metrics: no full quotas; lower --quota below the corpus size")

    metrics_path = out_dir / "metrics.csv"
    metrics_path.write_text(write_metrics_csv(results))
    inputs = {
        "corpus.json": out_dir / "corpus.json",
        "mapping.csv": out_dir / "mapping.csv",
        "models.json": out_dir / "models.json",
    }
    _write_manifest(out_dir, "metrics", config, inputs, {"metrics.csv": metrics_path})
    log.info("metrics: %d quotas across sizes %s", len(results), sorted(config.quota_sizes))
    return 0


def cmd_citations(config: PipelineConfig) -> int:
    out_dir = _out_dir(config)
    index = _load_index(out_dir, "citations")
    doc_ids = [d.doc_id for d in index.documents]

    api_ids = {doc_id: doc_id for doc_id in doc_ids}
    inputs = {"corpus.json": out_dir / "corpus.json"}
    if config.id_mapping:
        mapping_path = Path(config.id_mapping)
        if not mapping_path.exists():
            raise DataError(f"citations: id mapping {mapping_path} does not exist")
        id_map = load_id_mapping(mapping_path.read_text())
        api_ids = {doc_id: id_map.get(doc_id, doc_id) for doc_id in doc_ids}
        inputs["id_mapping"] = mapping_path

    fixture = config.offline_fixture
    if config.offline and not fixture:
        raise UsageError("citations: --offline requires an offline fixture path")
    client_config = ClientConfig(
        base_url=config.client_base_url,
        api_key=api_key_from_env(),
        requests_per_second=config.client_rps,
        max_retries=config.client_max_retries,
        cache_dir=config.cache_dir,
        offline_fixture=fixture if config.offline else None,
    )
    client = CitationsClient(client_config)
    by_api_id = client.fetch_citations(
        [api_ids[doc_id] for doc_id in doc_ids], force_refetch=config.force_refetch
    )
    records = {}
    for doc_id in doc_ids:
        record = by_api_id.get(api_ids[doc_id])
        if record is not None:
            records[doc_id] = dataclasses.replace(record, doc_id=doc_id)

    citations_path = out_dir / "citations.json"
    write_citations_file(records, citations_path)
    _write_manifest(out_dir, "citations", config, inputs, {"citations.json": citations_path})
    log.info("citations: %d records (%d failures, %d citing papers without a year)",
             len(records), len(client.failures), client.dropped_no_year)
    if client.failures:
        raise NetworkError(
            f"citations: {len(client.failures)} ids failed after retries; partial results written"
        )
    return 0


def cmd_trend(config: PipelineConfig) -> int:
    out_dir = _out_dir(config)
    index = _load_index(out_dir, "trend")
    mapping = _load_surface_mapping(out_dir, "trend")
    entities_by_doc = _entities_by_doc(index, mapping)
    surfaces_by_doc = {
        doc.doc_id: sorted({m.surface for m in index.mentions(doc.doc_id)})
        for doc in index.documents
    }
    rows = trend_table(
        index, entities_by_doc, surfaces_by_doc,
        config.quota_sizes, poly_degree=config.poly_degree,
    )
    if not rows:
        raise DataError("trend: no full quotas; lower --quota below the corpus size")
    trend_path = out_dir / "trend.csv"
    trend_path.write_text(write_trend_csv(rows))
    grid = slope_grid(rows, config.split_year)
    for cell in grid:
        if math.isnan(cell["slope"]):
            cell["slope"] = None  # NaN is not valid JSON
    slopes_path = out_dir / "slopes.json"
    slopes_path.write_text(json.dumps(grid, indent=2, sort_keys=True) + "\n")
    _write_manifest(
        out_dir, "trend", config,
        {"corpus.json": out_dir / "corpus.json", "mapping.csv": out_dir / "mapping.csv"},
        {"trend.csv": trend_path, "slopes.json": slopes_path},
    )
    log.info("trend: %d rows, slope grid split at %d", len(rows), config.split_year)
    return 0


def cmd_correlate(config: PipelineConfig) -> int:
    out_dir = _out_dir(config)
    index = _load_index(out_dir, "correlate")
    mapping = _load_surface_mapping(out_dir, "correlate")
    timelines = _build_timelines(index, mapping, out_dir, "correlate")
    entities_by_doc = _entities_by_doc(index, mapping)
    citations = _load_citations_artifact(out_dir, config)
    if citations is None:
        raise DataError("correlate: missing citations.json; run `fice citations` first")

    doc_values: dict[str, dict[str, float]] = {m: {} for m in METHOD_ORDER}
    doc_c5: dict[str, float] = {}
    for doc in index.documents:
        doc_timelines = [
            timelines[eid] for eid in entities_by_doc.get(doc.doc_id, ()) if eid in timelines
        ]
        fice_v, weight_v, fresh_v = document_fice(
            doc, doc_timelines, config.degenerate_weight
        )
        doc_values["fice"][doc.doc_id] = fice_v
        doc_values["weight_only"][doc.doc_id] = weight_v
        doc_values["ratio_only"][doc.doc_id] = fresh_v
        doc_values["dichotomous"][doc.doc_id] = float(len(doc_timelines))
        doc_c5[doc.doc_id] = float(c5(citations.get(doc.doc_id), config.base_year))

    outputs: dict[str, Path] = {}
    summary = []
    for q in sorted(config.quota_sizes):
        bins = bin_by_c5(index, citations, q, config.base_year)
        if not bins:
            log.warning("correlate: quota %d exceeds corpus size; skipped", q)
            continue
        fice_rows = correlation_rows(bins, doc_values["fice"], doc_c5)
        csv_path = out_dir / f"correlation-{q}.csv"
        csv_path.write_text(write_correlation_csv(fice_rows))
        outputs[csv_path.name] = csv_path
        for method in METHOD_ORDER:
            rows = correlation_rows(bins, doc_values[method], doc_c5)
            report = correlate_rows(rows, p_method=config.p_method)
            summary.append(
                {"method": method, "q": q, "rho": report.rho, "p_value": report.p_value}
            )
    if not summary:
        raise DataError("correlate: no full quotas; lower --quota below the corpus size")

    summary_path = out_dir / "correlation_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    outputs[summary_path.name] = summary_path
    inputs = {
        "corpus.json": out_dir / "corpus.json",
        "mapping.csv": out_dir / "mapping.csv",
        "models.json": out_dir / "models.json",
    }
    citations_artifact = out_dir / "citations.json"
    if citations_artifact.exists():
        inputs["citations.json"] = citations_artifact
    _write_manifest(out_dir, "correlate", config, inputs, outputs)
    log.info("correlate: %d summary cells across quota sizes %s",
             len(summary), sorted(config.quota_sizes))
    return 0


def cmd_synth(config: PipelineConfig) -> int:
    spec = GeneratorSpec(
        n_entities=config.synth_entities,
        year_start=config.synth_year_start,
        year_end=config.synth_year_end,
        profiles_per_entity=config.synth_profiles,
        seed=config.seed,
    )
    corpus = generate_corpus(spec)
    out_dir = _out_dir(config)
    outputs = {}
    for name, text in (
        ("corpus.bib", corpus.bibtex),
        ("entities.jsonl", corpus.entities_jsonl),
        ("citations.json", corpus.citations_json),
        ("ground_truth.json", corpus.ground_truth_json),
    ):
        path = out_dir / name
        path.write_text(text)
        outputs[name] = path
    _write_manifest(out_dir, "synth", config, {}, outputs)
    log.info("synth: %d entities, %d documents, years %d-%d",
             spec.n_entities, len(corpus.documents), spec.year_start, spec.year_end)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--quota", metavar="N", type=int, action="append",
                        help="quota size; repeat for several sizes")
    common.add_argument("--threshold", metavar="F", type=float,
                        help="similarity threshold for conflation")
    common.add_argument("--offline", action="store_true",
                        help="serve citations from the offline fixture")
    common.add_argument("--force-refetch", action="store_true",
                        help="ignore cached citation responses")
    common.add_argument("--workers", metavar="N", type=int, help="fit worker processes")
    common.add_argument("--seed", metavar="N", type=int, help="run seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--bibtex", metavar="PATH", help="BibTeX input file")
    common.add_argument("--entities", metavar="PATH", help="entity mentions JSONL")
    common.add_argument("--scores", metavar="PATH", help="pair similarity scores CSV")
    common.add_argument("--citations-file", metavar="PATH", help="citations JSON input")
    common.add_argument("--id-mapping", metavar="PATH", help="doc_id,api_id CSV")
    common.add_argument("--offline-fixture", metavar="PATH", help="citations fixture JSON")
    common.add_argument("--cache-dir", metavar="DIR", help="citation cache directory")
    common.add_argument("--base-year", metavar="Y", type=int, help="C5 window start year")
    common.add_argument("--split-year", metavar="Y", type=int, help="trend slope split year")
    common.add_argument("--poly-degree", metavar="D", type=int, help="trend polynomial degree")
    common.add_argument("--degenerate-weight", metavar="W", type=float,
                        help="weight for degenerate informativity ranges")
    common.add_argument("--p-method", choices=("t", "exact"), help="p-value method")
    common.add_argument("--pair-quota", metavar="N", type=int,
                        help="quota scope for candidate pair enumeration")
    common.add_argument("--base-url", metavar="URL", help="citations API base URL")
    common.add_argument("--rps", metavar="F", type=float, help="API requests per second")
    common.add_argument("--max-retries", metavar="N", type=int, help="API retry budget")
    common.add_argument("--learning-rate", metavar="F", type=float, help="fit learning rate")
    common.add_argument("--max-epochs", metavar="N", type=int, help="fit epoch cap")
    common.add_argument("--synth-entities", metavar="N", type=int, help="synthetic entity count")
    common.add_argument("--synth-year-start", metavar="Y", type=int, help="synthetic span start")
    common.add_argument("--synth-year-end", metavar="Y", type=int, help="synthetic span end")
    common.add_argument("--synth-profiles", metavar="K", type=int,
                        help="profiles per synthetic entity")

    parser = _Parser(
        prog="fice",
        description="Freshness and informativity weighted cognitive extent pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands = {
        "ingest": (cmd_ingest, "parse BibTeX and entity mentions into a corpus index"),
        "disambiguate": (cmd_disambiguate, "conflate entity surfaces above the threshold"),
        "fit-df": (cmd_fit_df, "fit document-frequency curves per entity"),
        "metrics": (cmd_metrics, "compute FICE and baselines per quota"),
        "citations": (cmd_citations, "fetch or load per-paper citation years"),
        "trend": (cmd_trend, "emit extent-over-time table and slope grid"),
        "correlate": (cmd_correlate, "correlate FICE with citation counts"),
        "synth": (cmd_synth, "generate a synthetic corpus with ground truth"),
    }
    for name, (handler, help_text) in commands.items():
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(handler=handler)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise UsageError("a subcommand is required (see `fice --help`)")
        config = resolve_config(args)
        return args.handler(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FitError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NetworkError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
