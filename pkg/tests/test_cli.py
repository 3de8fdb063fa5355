"""End-to-end tests for the staged command-line pipeline."""

import hashlib
import json
import shutil

import pytest

from fice.cli import PipelineConfig, main, resolve_config, build_parser
from fice.corpus import load_citations, load_corpus
from fice.dfcurve import load_models
from fice.disambig import load_mapping
from fice.metrics import read_metrics_csv

STAGES = (
    "synth", "ingest", "disambiguate", "fit-df", "citations",
    "metrics", "trend", "correlate",
)


def run(*argv: str) -> int:
    return main(list(argv))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Every stage once over a small synthetic corpus; returns the dirs."""
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data"
    out = root / "out"
    codes = {}
    codes["synth"] = run(
        "synth", "--out", str(data), "--seed", "11",
        "--synth-entities", "10", "--synth-year-start", "1994",
        "--synth-year-end", "2012",
    )
    common = ("--out", str(out), "--quota", "10", "--quota", "15",
              "--base-year", "2008", "--split-year", "2008", "--seed", "11")
    codes["ingest"] = run(
        "ingest", "--bibtex", str(data / "corpus.bib"),
        "--entities", str(data / "entities.jsonl"), *common,
    )
    codes["disambiguate"] = run("disambiguate", *common)
    codes["fit-df"] = run("fit-df", "--workers", "1", *common)
    codes["citations"] = run(
        "citations", "--offline",
        "--offline-fixture", str(data / "citations.json"),
        "--cache-dir", str(root / "cache"), *common,
    )
    codes["metrics"] = run("metrics", *common)
    codes["trend"] = run("trend", *common)
    codes["correlate"] = run("correlate", *common)
    return {"data": data, "out": out, "codes": codes, "common": common}


class TestChain:
    def test_every_stage_exits_zero(self, pipeline):
        assert pipeline["codes"] == {stage: 0 for stage in STAGES}

    def test_expected_artifacts_exist(self, pipeline):
        out = pipeline["out"]
        names = [
            "corpus.json", "year_report.csv", "mapping.csv", "models.json",
            "excluded.json", "citations.json", "metrics.csv", "trend.csv",
            "slopes.json", "correlation-10.csv", "correlation-15.csv",
            "correlation_summary.json",
        ]
        for name in names:
            assert (out / name).exists(), name
        for stage in STAGES[1:]:
            assert (out / f"{stage}.manifest.json").exists(), stage
        assert (pipeline["data"] / "synth.manifest.json").exists()

    def test_corpus_artifact_round_trips(self, pipeline):
        index = load_corpus((pipeline["out"] / "corpus.json").read_text())
        assert len(index.documents) == 147
        assert (index.year_min, index.year_max) == (2001, 2012)

    def test_mapping_covers_every_surface(self, pipeline):
        index = load_corpus((pipeline["out"] / "corpus.json").read_text())
        _, mapping = load_mapping((pipeline["out"] / "mapping.csv").read_text())
        surfaces = {m.surface for m in index.all_mentions()}
        assert set(mapping) == surfaces
        # one entity per synthetic surface: no cross-entity token overlap
        assert len(set(mapping.values())) == 10

    def test_models_cover_every_entity(self, pipeline):
        out = pipeline["out"]
        models = load_models((out / "models.json").read_text())
        _, mapping = load_mapping((out / "mapping.csv").read_text())
        assert set(models) == set(mapping.values())
        assert json.loads((out / "excluded.json").read_text()) == {}

    def test_metrics_table_shape(self, pipeline):
        rows = read_metrics_csv((pipeline["out"] / "metrics.csv").read_text())
        # 147 docs: 14 full quotas of 10 plus 9 of 15, partials dropped
        assert len(rows) == 14 + 9
        assert [r.quota_id for r in rows[:2]] == ["chron-10-000", "chron-10-001"]
        for r in rows:
            assert r.fice <= r.ratio_only + 1e-9
        assert any(r.mean_c5 > 0 for r in rows)  # citations artifact was picked up

    def test_citations_stage_round_trips_fixture(self, pipeline):
        served = load_citations((pipeline["out"] / "citations.json").read_text())
        fixture = load_citations((pipeline["data"] / "citations.json").read_text())
        assert served == fixture

    def test_trend_table_and_slope_grid(self, pipeline):
        out = pipeline["out"]
        lines = (out / "trend.csv").read_text().splitlines()
        assert lines[0] == "year,quota_size,extent_disambiguated,extent_undisambiguated,poly_fit_value"
        assert len(lines) - 1 == 14 + 9
        slopes = json.loads((out / "slopes.json").read_text())
        assert len(slopes) == 4  # 2 periods x 2 quota sizes
        periods = {cell["period"] for cell in slopes}
        assert len(periods) == 2
        assert all("2008" in p for p in periods)  # both ranges meet at the split
        assert {cell["quota_size"] for cell in slopes} == {10, 15}

    def test_correlation_outputs(self, pipeline):
        out = pipeline["out"]
        for q in (10, 15):
            lines = (out / f"correlation-{q}.csv").read_text().splitlines()
            assert lines[0] == "bin,log_mean_c5,mean_fice,stddev"
            assert 3 <= len(lines) - 1 <= 147 // q
        summary = json.loads((out / "correlation_summary.json").read_text())
        assert len(summary) == 8  # 4 methods x 2 quota sizes
        methods = [cell["method"] for cell in summary if cell["q"] == 10]
        assert methods == ["dichotomous", "weight_only", "ratio_only", "fice"]
        for cell in summary:
            assert set(cell) == {"method", "q", "rho", "p_value"}
            assert -1.0 <= cell["rho"] <= 1.0
            assert 0.0 <= cell["p_value"] <= 1.0

    def test_manifest_shape_and_digests(self, pipeline):
        out = pipeline["out"]
        manifest = json.loads((out / "metrics.manifest.json").read_text())
        assert set(manifest) == {"stage", "version", "config_digest", "inputs", "outputs"}
        assert manifest["stage"] == "metrics"
        digest = hashlib.sha256((out / "metrics.csv").read_bytes()).hexdigest()
        assert manifest["outputs"]["metrics.csv"] == digest
        assert manifest["inputs"].keys() == {"corpus.json", "mapping.csv", "models.json"}

    def test_metrics_rerun_is_byte_identical(self, pipeline):
        out = pipeline["out"]
        before = {
            name: (out / name).read_bytes()
            for name in ("metrics.csv", "metrics.manifest.json")
        }
        assert run("metrics", *pipeline["common"]) == 0
        for name, blob in before.items():
            assert (out / name).read_bytes() == blob

    def test_synth_rerun_is_byte_identical(self, pipeline, tmp_path):
        assert run(
            "synth", "--out", str(tmp_path), "--seed", "11",
            "--synth-entities", "10", "--synth-year-start", "1994",
            "--synth-year-end", "2012",
        ) == 0
        for name in ("corpus.bib", "entities.jsonl", "citations.json", "ground_truth.json"):
            assert (tmp_path / name).read_bytes() == (pipeline["data"] / name).read_bytes()


class TestWorkerPool:
    def test_parallel_fit_matches_serial(self, pipeline, tmp_path):
        out = pipeline["out"]
        for name in ("corpus.json", "mapping.csv"):
            shutil.copy(out / name, tmp_path / name)
        assert run("fit-df", "--workers", "2", "--out", str(tmp_path), "--seed", "11") == 0
        assert (tmp_path / "models.json").read_bytes() == (out / "models.json").read_bytes()


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run("frobnicate") == 1
        assert "usage error" in capsys.readouterr().err

    def test_missing_subcommand_is_usage_error(self, capsys):
        assert run() == 1
        assert "subcommand" in capsys.readouterr().err

    def test_bad_threshold_is_usage_error(self, tmp_path, capsys):
        assert run("disambiguate", "--out", str(tmp_path), "--threshold", "1.5") == 1
        assert "threshold" in capsys.readouterr().err

    def test_missing_upstream_names_prior_stage(self, tmp_path, capsys):
        assert run("metrics", "--out", str(tmp_path)) == 2
        err = capsys.readouterr().err
        assert "data error" in err and "fice ingest" in err

    def test_fit_without_mapping_names_disambiguate(self, tmp_path, capsys):
        bib = tmp_path / "tiny.bib"
        bib.write_text(
            "@article{a1,\n title = {Alpha Beta},\n year = {2001},\n}\n"
        )
        assert run("ingest", "--bibtex", str(bib), "--out", str(tmp_path)) == 0
        assert run("fit-df", "--out", str(tmp_path)) == 2
        assert "fice disambiguate" in capsys.readouterr().err

    def test_missing_bibtex_file_is_data_error(self, tmp_path):
        assert run("ingest", "--bibtex", str(tmp_path / "nope.bib"),
                   "--out", str(tmp_path)) == 2

    def test_unreachable_api_is_network_error(self, tmp_path, capsys):
        bib = tmp_path / "tiny.bib"
        bib.write_text(
            "@article{a1,\n title = {Alpha Beta},\n year = {2001},\n}\n"
        )
        assert run("ingest", "--bibtex", str(bib), "--out", str(tmp_path)) == 0
        code = run(
            "citations", "--out", str(tmp_path),
            "--base-url", "http://127.0.0.1:9",
            "--rps", "1000", "--max-retries", "0",
            "--cache-dir", str(tmp_path / "cache"),
        )
        assert code == 3
        assert "network error" in capsys.readouterr().err

    def test_offline_without_fixture_is_usage_error(self, tmp_path, capsys):
        bib = tmp_path / "tiny.bib"
        bib.write_text(
            "@article{a1,\n title = {Alpha Beta},\n year = {2001},\n}\n"
        )
        assert run("ingest", "--bibtex", str(bib), "--out", str(tmp_path)) == 0
        assert run("citations", "--offline", "--out", str(tmp_path)) == 1


class TestConfigResolution:
    def parse(self, *argv):
        return build_parser().parse_args(list(argv))

    def test_defaults(self):
        config = resolve_config(self.parse("metrics"))
        assert config.quota_sizes == (125, 250, 500)
        assert config.threshold == 0.5
        assert config.base_year == 2015

    def test_config_file_sections(self, tmp_path):
        path = tmp_path / "fice.toml"
        path.write_text(
            "[paths]\nout_dir = 'results'\n"
            "[pipeline]\nquota_sizes = [25, 50]\nthreshold = 0.8\n"
            "[fit]\nlearning_rate = 0.01\nmax_epochs = 900\n"
            "[client]\nrequests_per_second = 4.0\n"
            "[synth]\nn_entities = 6\n"
        )
        config = resolve_config(self.parse("metrics", "--config", str(path)))
        assert config.out_dir == "results"
        assert config.quota_sizes == (25, 50)
        assert config.threshold == 0.8
        assert config.fit.learning_rate == 0.01
        assert config.fit.max_epochs == 900
        assert config.client_rps == 4.0
        assert config.synth_entities == 6

    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "fice.toml"
        path.write_text("[pipeline]\nthreshold = 0.8\nquota_sizes = [25]\n")
        config = resolve_config(
            self.parse("metrics", "--config", str(path), "--threshold", "0.3")
        )
        assert config.threshold == 0.3  # flag wins
        assert config.quota_sizes == (25,)  # file survives where no flag given

    def test_seed_flows_into_fit_seed(self):
        config = resolve_config(self.parse("fit-df", "--seed", "7"))
        assert config.seed == 7
        assert config.fit.rng_seed == 7

    def test_explicit_fit_seed_beats_run_seed(self, tmp_path):
        path = tmp_path / "fice.toml"
        path.write_text("[fit]\nrng_seed = 3\n")
        config = resolve_config(
            self.parse("fit-df", "--config", str(path), "--seed", "7")
        )
        assert config.fit.rng_seed == 3

    def test_unknown_section_rejected(self, tmp_path, capsys):
        path = tmp_path / "fice.toml"
        path.write_text("[nonsense]\nx = 1\n")
        assert run("metrics", "--config", str(path)) == 1
        assert "nonsense" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        path = tmp_path / "fice.toml"
        path.write_text("[pipeline]\nquotas = [1]\n")
        assert run("metrics", "--config", str(path)) == 1
        assert "quotas" in capsys.readouterr().err

    def test_config_digest_tracks_values(self):
        a = PipelineConfig(threshold=0.5)
        b = PipelineConfig(threshold=0.6)
        assert a.digest() == PipelineConfig(threshold=0.5).digest()
        assert a.digest() != b.digest()
