import shutil

import numpy as np
import pytest
import yaml

from geomeval.config import ConfigError, load_config, parse_config
from geomeval.correlation import metric_correlation
from geomeval.data import DatasetManifest, ManifestItem
from geomeval.io import write_manifest, write_tensor
from geomeval.pipeline import EvalReport, run_pipeline


def make_dataset(root, name="demo", n_classes=3, per=4, t=6, d=5, seed=0):
    rng = np.random.default_rng(seed)
    data_dir = root / name
    data_dir.mkdir(parents=True, exist_ok=True)
    centers = 4.0 * rng.standard_normal((n_classes, d))
    items = []
    for c in range(n_classes):
        for i in range(per):
            clip = f"{name}_c{c}_{i}"
            frames = centers[c] + 0.3 * rng.standard_normal((t, d))
            path = data_dir / f"{clip}.gevl"
            write_tensor(path, frames.astype(np.float32))
            items.append(ManifestItem(clip, f"class{c}", 1.0 + rng.random(), str(path)))
    manifest_path = data_dir / "manifest.csv"
    write_manifest(manifest_path, DatasetManifest(items=tuple(items), subset_name=name))
    return manifest_path


def base_config(root, manifest_path, **overrides):
    raw = {
        "schema_version": 1,
        "seed": 7,
        "output_dir": str(root / "out"),
        "subsets": [{"name": "demo", "manifest": str(manifest_path)}],
        "pooling": ["mean_time_incl_pad"],
        "pca_dims": ["none"],
        "distance_metrics": ["euclidean"],
        "metrics": ["p_at_1"],
    }
    raw.update(overrides)
    return raw


def test_minimal_config_yields_single_score_row(tmp_path):
    manifest = make_dataset(tmp_path)
    config = parse_config(base_config(tmp_path, manifest))
    report = run_pipeline(config)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert (row["subset"], row["feature"], row["metric_kind"], row["score"]) == (
        "demo",
        "mean_time_incl_pad|pca=none",
        "euclidean",
        "p_at_1",
    )
    assert row["status"] == "ok"
    assert row["value"] == 1.0  # well-separated blobs


def test_rerun_is_byte_identical(tmp_path):
    manifest = make_dataset(tmp_path)
    raw = base_config(
        tmp_path,
        manifest,
        metrics=["p_at_1", "gsr", "silhouette"],
        pca_dims=[3, "none"],
        distance_metrics=["euclidean", "spearman"],
        baseline={"metrics": ["p_at_1"], "permutations": 100},
        clustering=True,
    )
    config = parse_config(raw)
    r1 = run_pipeline(config)
    csv1 = tmp_path / "r1.csv"
    r1.write_csv(csv1)
    # second run reuses the cache
    r2 = run_pipeline(parse_config(raw))
    csv2 = tmp_path / "r2.csv"
    r2.write_csv(csv2)
    assert csv1.read_bytes() == csv2.read_bytes()
    assert r2.metadata["cache_hits"] > 0
    # cold cache reproduces the same bytes
    shutil.rmtree(config.resolved_cache_dir())
    r3 = run_pipeline(parse_config(raw))
    csv3 = tmp_path / "r3.csv"
    r3.write_csv(csv3)
    assert csv1.read_bytes() == csv3.read_bytes()


def test_corrupt_cache_entry_is_rebuilt(tmp_path):
    manifest = make_dataset(tmp_path)
    raw = base_config(tmp_path, manifest)
    config = parse_config(raw)
    r1 = run_pipeline(config)
    cache_files = list((tmp_path / "out" / "cache").glob("*.gevl"))
    assert cache_files
    for f in cache_files:
        f.write_bytes(b"garbage")
    r2 = run_pipeline(parse_config(raw))
    assert r2.metadata["cache_hits"] == 0
    assert r1.sorted_rows() == r2.sorted_rows()


def test_completeness_score_plus_error_rows(tmp_path):
    manifest = make_dataset(tmp_path, per=2)  # 6 items total
    raw = base_config(tmp_path, manifest, metrics=["p_at_1", "p_at_9", "gsr"])
    report = run_pipeline(parse_config(raw))
    # p_at_9 cannot run with 5 candidate neighbors: error row, others fine
    assert len(report.rows) == 3
    by_score = {r["score"]: r["status"] for r in report.rows}
    assert by_score == {"p_at_1": "ok", "p_at_9": "error", "gsr": "ok"}


def test_duplicate_clip_ids_caught_at_validation(tmp_path):
    manifest = make_dataset(tmp_path, n_classes=2, per=2)
    text = manifest.read_text().splitlines()
    text.append(text[1])  # repeat the first data row
    manifest.write_text("\n".join(text) + "\n")
    raw = base_config(tmp_path, manifest)
    with pytest.raises(ConfigError, match="duplicate clip_id"):
        run_pipeline(parse_config(raw))


def test_missing_manifest_fails_validation_before_compute(tmp_path):
    raw = base_config(tmp_path, tmp_path / "absent.csv")
    with pytest.raises(ConfigError, match="absent.csv"):
        run_pipeline(parse_config(raw))


def test_unknown_keys_and_all_violations_reported(tmp_path):
    raw = base_config(tmp_path, make_dataset(tmp_path))
    raw["bogus"] = 1
    raw["metrics"] = ["p_at_1", "nonsense"]
    raw["pca_dims"] = [0]
    with pytest.raises(ConfigError) as err:
        parse_config(raw)
    text = str(err.value)
    assert "bogus" in text and "nonsense" in text and "pca_dims" in text


def test_seed_is_mandatory(tmp_path):
    raw = base_config(tmp_path, make_dataset(tmp_path))
    del raw["seed"]
    with pytest.raises(ConfigError, match="seed"):
        parse_config(raw)


def test_filter_block_applies(tmp_path):
    manifest = make_dataset(tmp_path, n_classes=3, per=4)
    raw = base_config(
        tmp_path, manifest, filter={"min_class_size": 5, "duration_percentile": 100.0}
    )
    with pytest.raises(Exception):  # everything filtered away
        run_pipeline(parse_config(raw))


def test_empty_filter_block_uses_standard_defaults(tmp_path):
    # 3 classes of 4 clips each: the default minimum class size of 6
    # removes everything
    manifest = make_dataset(tmp_path, n_classes=3, per=4)
    raw = base_config(tmp_path, manifest, filter={})
    with pytest.raises(Exception):
        run_pipeline(parse_config(raw))
    # with 8 per class the subset survives both default stages
    manifest = make_dataset(tmp_path / "big", n_classes=2, per=8)
    raw = base_config(tmp_path, manifest, filter={})
    raw["subsets"] = [{"name": "demo", "manifest": str(manifest)}]
    report = run_pipeline(parse_config(raw))
    assert report.rows and all(r["status"] == "ok" for r in report.rows)


def test_dtw_block_adds_reranked_feature_rows(tmp_path):
    manifest = make_dataset(tmp_path, n_classes=2, per=3)
    raw = base_config(
        tmp_path,
        manifest,
        metrics=["p_at_1"],
        dtw={"band_radius": 1.0, "stride": 1, "shortlist_size": 5, "pca_dims": 2},
    )
    report = run_pipeline(parse_config(raw))
    features = {r["feature"] for r in report.rows}
    assert features == {"mean_time_incl_pad|pca=none", "mean_time_incl_pad|pca=none|dtw"}


def test_noise_and_baseline_rows_present(tmp_path):
    manifest = make_dataset(tmp_path)
    raw = base_config(
        tmp_path,
        manifest,
        metrics=["p_at_1", "gsr"],
        baseline={"metrics": ["gsr"], "permutations": 100},
        noise={"fractions": [0.0, 0.25], "metrics": ["p_at_1"]},
    )
    report = run_pipeline(parse_config(raw))
    scores = {r["score"] for r in report.rows}
    assert {
        "p_at_1",
        "gsr",
        "gsr_baseline_mean",
        "gsr_baseline_ci_low",
        "gsr_baseline_ci_high",
        "gsr_p_value",
        "p_at_1_noise_0",
        "p_at_1_noise_0.25",
    } <= scores
    noise0 = next(r for r in report.rows if r["score"] == "p_at_1_noise_0")
    clean = next(r for r in report.rows if r["score"] == "p_at_1")
    assert noise0["value"] == clean["value"]


def test_oversized_pca_request_clamped_and_flagged(tmp_path):
    manifest = make_dataset(tmp_path, n_classes=2, per=3, d=4)  # 6 items, 4 dims
    raw = base_config(tmp_path, manifest, pca_dims=[100])
    report = run_pipeline(parse_config(raw))
    assert all(r["status"] == "ok" for r in report.rows)
    assert report.metadata["flags"]["pca_dims_clamped"] == 1


def test_clustering_rows(tmp_path):
    manifest = make_dataset(tmp_path)
    raw = base_config(tmp_path, manifest, clustering=True)
    report = run_pipeline(parse_config(raw))
    km = [r for r in report.rows if r["metric_kind"] == "kmeans"]
    assert {r["score"] for r in km} == {"nmi", "purity", "ari", "weighted_purity"}
    assert all(r["status"] == "ok" for r in km)
    # separated blobs cluster perfectly
    assert all(r["value"] == pytest.approx(1.0) for r in km)


def test_perception_rows(tmp_path):
    manifest = make_dataset(tmp_path, n_classes=2, per=3)
    trials = tmp_path / "trials.csv"
    # reference ids exist in the dataset
    trials.write_text(
        "x_id,a_id,b_id,decision\n"
        "demo_c0_0,demo_c0_1,demo_c1_0,A\n"
        "demo_c1_1,demo_c1_2,demo_c0_2,A\n"
    )
    trips = tmp_path / "triplets.csv"
    trips.write_text("anchor_id,positive_id,negative_id\ndemo_c0_0,demo_c0_1,demo_c1_0\n")
    raw = base_config(
        tmp_path, manifest, perception={"trials": str(trials), "triplets": str(trips)}
    )
    report = run_pipeline(parse_config(raw))
    scores = {r["score"]: r["value"] for r in report.rows if r["status"] == "ok"}
    assert scores["probe_accuracy"] == 1.0
    assert scores["triplet_accuracy"] == 1.0


def test_report_json_round_trip_and_csv_format(tmp_path):
    manifest = make_dataset(tmp_path)
    raw = base_config(tmp_path, manifest, metrics=["p_at_1", "gsr"])
    report = run_pipeline(parse_config(raw))
    json_path = tmp_path / "report.json"
    report.write_json(json_path)
    back = EvalReport.read_json(json_path)
    assert back.sorted_rows() == report.sorted_rows()
    csv_path = tmp_path / "report.csv"
    report.write_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "subset,feature,metric_kind,score,value,status,message"
    gsr_line = [ln for ln in lines if ",gsr," in ln][0]
    value = gsr_line.split(",")[4]
    assert 0.0 <= float(value) <= 100.0 and "." in value
    p1_line = [ln for ln in lines if ",p_at_1," in ln][0]
    assert float(p1_line.split(",")[4]) == 100.0  # percent formatting


def test_yaml_file_loading(tmp_path):
    manifest = make_dataset(tmp_path)
    raw = base_config(tmp_path, manifest)
    cfg_path = tmp_path / "run.yaml"
    cfg_path.write_text(yaml.safe_dump(raw))
    config = load_config(cfg_path)
    assert config.seed == 7
    report = run_pipeline(config)
    assert report.rows[0]["status"] == "ok"


# ---------------------------------------------------------------- correlation

def _fake_rows(values_by_feature):
    rows = []
    for feature, scores in values_by_feature.items():
        for score, value in scores.items():
            rows.append(
                {
                    "subset": "s1",
                    "feature": feature,
                    "metric_kind": "spearman",
                    "score": score,
                    "value": value,
                    "status": "ok",
                    "message": "",
                }
            )
    return rows


def test_identical_scores_correlate_to_one():
    rows = _fake_rows(
        {
            "f1": {"p_at_1": 0.1, "gsr": 10.0},
            "f2": {"p_at_1": 0.2, "gsr": 20.0},
            "f3": {"p_at_1": 0.3, "gsr": 30.0},
        }
    )
    names, matrix = metric_correlation(rows)
    assert names == ["gsr", "p_at_1"]
    assert matrix[0][1] == pytest.approx(1.0)


def test_reversed_ranking_correlates_to_minus_one():
    rows = _fake_rows(
        {
            "f1": {"p_at_1": 0.1, "gsr": 30.0},
            "f2": {"p_at_1": 0.2, "gsr": 20.0},
            "f3": {"p_at_1": 0.3, "gsr": 10.0},
        }
    )
    _, matrix = metric_correlation(rows)
    assert matrix[0][1] == pytest.approx(-1.0)


def test_cscf_is_flipped_before_correlating():
    # raw CSCF falls as p_at_1 rises: after the 1-x transform they agree
    rows = _fake_rows(
        {
            "f1": {"p_at_1": 0.1, "cscf": 0.9},
            "f2": {"p_at_1": 0.2, "cscf": 0.5},
            "f3": {"p_at_1": 0.3, "cscf": 0.1},
        }
    )
    names, matrix = metric_correlation(rows)
    assert names == ["cscf", "p_at_1"]
    assert matrix[0][1] == pytest.approx(1.0)


def test_constant_score_vector_reported_missing():
    rows = _fake_rows(
        {
            "f1": {"p_at_1": 0.1, "gsr": 10.0},
            "f2": {"p_at_1": 0.1, "gsr": 20.0},
            "f3": {"p_at_1": 0.1, "gsr": 30.0},
        }
    )
    _, matrix = metric_correlation(rows)
    assert matrix[0][1] is None
    assert matrix[0][0] == 1.0


def test_too_few_configs_rejected():
    rows = _fake_rows({"f1": {"p_at_1": 0.1, "gsr": 1.0}, "f2": {"p_at_1": 0.2, "gsr": 2.0}})
    with pytest.raises(Exception, match="3"):
        metric_correlation(rows)


def test_macro_average_across_subsets_first():
    rows = []
    # two subsets; per-subset rankings disagree but the macro averages agree
    per_subset = {
        ("f1", "s1"): (0.0, 0.0),
        ("f1", "s2"): (0.4, 40.0),
        ("f2", "s1"): (0.3, 30.0),
        ("f2", "s2"): (0.3, 30.0),
        ("f3", "s1"): (0.8, 80.0),
        ("f3", "s2"): (0.0, 0.0),
    }
    for (f, s), (p1, g) in per_subset.items():
        for score, value in (("p_at_1", p1), ("gsr", g)):
            rows.append(
                {"subset": s, "feature": f, "metric_kind": "spearman", "score": score,
                 "value": value, "status": "ok", "message": ""}
            )
    names, matrix = metric_correlation(rows)
    assert matrix[0][1] == pytest.approx(1.0)
