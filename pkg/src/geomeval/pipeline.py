"""Config-driven orchestration: load, filter, pool, project, score, report.

Determinism contract: with a fixed config and seed, the report's rows are
byte-identical across runs, with or without a warm distance cache (matrices
are quantized to the cache's float32 before any metric sees them).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .baselines import label_noise_sweep, permutation_baseline
from .clustering import clustering_scores, kmeans, weighted_purity
from .config import ConfigError, RunConfig, validate_inputs
from .data import DistanceMatrix, EmbeddingSet
from .distances import pairwise_matrix
from .dtw import DtwConfig, dtw_rerank
from .errors import GeomevalError
from .io import filter_dataset, load_sequence_set, read_manifest, read_tensor, write_tensor
from .metrics import csr, cscf, f_value_cs, gsr, precision_at_k, silhouette
from .pca import fit_pca, transform
from .perception import probe_2afc, read_triplets_csv, read_trials_csv, triplet_eval
from .pooling import pool, stack_pooled

_CSV_COLUMNS = ("subset", "feature", "metric_kind", "score", "value", "status", "message")

# CSV rendering: (scale, decimals). Scores in [0, 1] print as percentages,
# GSR is already a percentage, p-values keep six decimals unscaled.
_PERCENT = (100.0, 2)
_ASIS = (1.0, 2)
_PVAL = (1.0, 6)


def _csv_format(score: str, value: float) -> str:
    base = score.split("_noise_")[0]
    if score.endswith("_p_value") or score == "p_value":
        scale, dec = _PVAL
    elif base.startswith("gsr"):
        scale, dec = _ASIS
    elif base.startswith(("probe_", "triplet_")) and ("rho" in base or "tau" in base):
        scale, dec = (1.0, 4)
    else:
        scale, dec = _PERCENT
    return f"{value * scale:.{dec}f}"


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def ok_rows(self):
        return [r for r in self.rows if r["status"] == "ok"]

    def error_rows(self):
        return [r for r in self.rows if r["status"] == "error"]

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r["subset"], r["feature"], r["metric_kind"], r["score"]))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_CSV_COLUMNS)
            for r in self.sorted_rows():
                value = "" if r["value"] is None else _csv_format(r["score"], r["value"])
                w.writerow(
                    [r["subset"], r["feature"], r["metric_kind"], r["score"], value, r["status"], r["message"]]
                )

    def write_json(self, path):
        payload = {"metadata": self.metadata, "rows": self.sorted_rows()}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "EvalReport":
        with open(path) as fh:
            payload = json.load(fh)
        return cls(rows=payload["rows"], metadata=payload.get("metadata", {}))


class _Recorder:
    """Collects rows for one (subset, feature, metric_kind) context."""

    def __init__(self, report: EvalReport, subset: str, feature: str, metric_kind: str):
        self.report = report
        self.key = {"subset": subset, "feature": feature, "metric_kind": metric_kind}

    def ok(self, score: str, value: float):
        self.report.rows.append(
            dict(self.key, score=score, value=float(value), status="ok", message="")
        )

    def error(self, score: str, exc: Exception):
        self.report.rows.append(
            dict(self.key, score=score, value=None, status="error", message=str(exc))
        )

    def attempt(self, score: str, fn):
        try:
            self.ok(score, fn())
        except GeomevalError as exc:
            self.error(score, exc)


def _subset_digest(manifest_path: str, manifest) -> str:
    h = hashlib.sha256()
    with open(manifest_path, "rb") as fh:
        h.update(fh.read())
    for item in manifest.items:
        h.update(item.clip_id.encode())
        if item.embedding_path and os.path.exists(item.embedding_path):
            with open(item.embedding_path, "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 20), b""):
                    h.update(chunk)
    return h.hexdigest()


def _compute_metric_value(metric: str, dist, labels, min_class_size: int, flags: dict) -> float:
    if metric.startswith("p_at_"):
        k = int(metric[len("p_at_") :])
        return precision_at_k(dist, labels, ks=(k,))[k]
    if metric == "gsr":
        return gsr(dist, labels, min_class_size)
    if metric == "csr":
        return csr(dist, labels, min_class_size)
    if metric == "cs":
        return f_value_cs(dist, labels, min_class_size)
    if metric == "cscf":
        return cscf(dist, labels, min_class_size)
    if metric == "silhouette":
        return silhouette(dist, labels, flags=flags)
    raise GeomevalError(f"unknown metric {metric!r}")


def _cached_distance(config: RunConfig, digest: str, feature: str, metric_kind: str, emb) -> tuple[DistanceMatrix, bool]:
    cache_dir = config.resolved_cache_dir()
    os.makedirs(cache_dir, exist_ok=True)
    key = hashlib.sha256(f"{digest}|{feature}|{metric_kind}|v1".encode()).hexdigest()
    path = os.path.join(cache_dir, f"{key}.gevl")
    if os.path.exists(path):
        try:
            values, _, header = read_tensor(path)
            if header.get("metric") == metric_kind and values.shape[0] == emb.n_items:
                return DistanceMatrix(values=values, metric_name=metric_kind), True
        except GeomevalError:
            pass  # unreadable cache entries are rebuilt, never fatal
    dist = pairwise_matrix(emb, metric_kind, n_workers=config.workers)
    values32 = dist.values.astype(np.float32)
    write_tensor(path, values32, valid_len=values32.shape[0], extra_header={"metric": metric_kind})
    # Metrics always consume the quantized values so cached and fresh runs agree.
    return DistanceMatrix(values=values32, metric_name=metric_kind, flags=dist.flags), False


def _score_matrix(config, report, rec_kind, subset_name, feature, dist, labels, flags, ids, perception_data):
    rec = _Recorder(report, subset_name, feature, rec_kind)
    for metric in config.metrics:
        rec.attempt(metric, lambda m=metric: _compute_metric_value(m, dist, labels, config.min_class_size, flags))

    if config.baseline:
        for metric in config.baseline.get("metrics", []):
            try:
                res = permutation_baseline(
                    dist,
                    labels,
                    metric,
                    n_permutations=config.baseline.get("permutations", 1000),
                    seed=config.seed,
                    min_class_size=config.min_class_size,
                )
                rec.ok(f"{metric}_baseline_mean", res.baseline_mean)
                rec.ok(f"{metric}_baseline_ci_low", res.ci_low)
                rec.ok(f"{metric}_baseline_ci_high", res.ci_high)
                rec.ok(f"{metric}_p_value", res.p_value)
            except GeomevalError as exc:
                for tail in ("baseline_mean", "baseline_ci_low", "baseline_ci_high", "p_value"):
                    rec.error(f"{metric}_{tail}", exc)

    if config.noise:
        fractions = [float(f) for f in config.noise["fractions"]]
        noise_metrics = config.noise.get("metrics", ["p_at_1", "gsr"])
        try:
            sweep = label_noise_sweep(
                dist, labels, fractions, noise_metrics, seed=config.seed,
                min_class_size=config.min_class_size,
            )
            for frac in fractions:
                for m in noise_metrics:
                    rec.ok(f"{m}_noise_{frac:g}", sweep[frac][m])
        except GeomevalError as exc:
            for frac in fractions:
                for m in noise_metrics:
                    rec.error(f"{m}_noise_{frac:g}", exc)

    if perception_data is not None:
        trials, triplets = perception_data
        if trials is not None:
            try:
                res = probe_2afc(dist, trials, ids)
                rec.ok("probe_accuracy", res["accuracy"])
                rec.ok("probe_p_value", res["p_value"])
                if res["spearman_rho"] == res["spearman_rho"]:  # skip NaN
                    rec.ok("probe_spearman_rho", res["spearman_rho"])
                    rec.ok("probe_kendall_tau", res["kendall_tau"])
            except GeomevalError as exc:
                rec.error("probe_accuracy", exc)
                rec.error("probe_p_value", exc)
        if triplets is not None:
            try:
                res = triplet_eval(dist, triplets, ids)
                rec.ok("triplet_accuracy", res["accuracy"])
                rec.ok("triplet_p_value", res["p_value"])
            except GeomevalError as exc:
                rec.error("triplet_accuracy", exc)
                rec.error("triplet_p_value", exc)


def run_pipeline(config: RunConfig, compute_only: bool = False) -> EvalReport:
    """Execute every configured combination; failures become error rows."""
    problems = validate_inputs(config)
    if problems:
        raise ConfigError(problems)
    os.makedirs(config.output_dir, exist_ok=True)

    report = EvalReport()
    flags: dict = {}
    sanitization: dict[str, int] = {}
    cache_hits = cache_misses = 0

    perception_data = None
    if config.perception:
        trials = read_trials_csv(config.perception["trials"]) if config.perception.get("trials") else None
        triplets = read_triplets_csv(config.perception["triplets"]) if config.perception.get("triplets") else None
        perception_data = (trials, triplets)

    for ref in config.subsets:
        manifest = read_manifest(ref.manifest, ref.name)
        if config.filter is not None:
            # standard preprocessing defaults: drop the top 2% longest clips,
            # then classes with fewer than six members
            manifest = filter_dataset(
                manifest,
                min_class_size=config.filter.get("min_class_size", 6),
                duration_percentile=config.filter.get("duration_percentile", 98.0),
            )
        sequences = load_sequence_set(manifest)
        sanitization[ref.name] = sum(s.sanitized for s in sequences)
        labels = manifest.labels()
        ids = [it.clip_id for it in manifest.items]
        digest = _subset_digest(ref.manifest, manifest)

        for strategy in config.pooling:
            try:
                vectors = [pool(s, strategy) for s in sequences]
                matrix, n_padded = stack_pooled(vectors)
                if n_padded:
                    flags["pooled_padded_vectors"] = flags.get("pooled_padded_vectors", 0) + n_padded
                base_emb = EmbeddingSet(matrix=matrix, ids=tuple(ids))
            except GeomevalError as exc:
                for dims in config.pca_dims:
                    feature = f"{strategy.spell()}|pca={dims if dims is not None else 'none'}"
                    for mk in config.distance_metrics:
                        rec = _Recorder(report, ref.name, feature, mk)
                        for metric in config.metrics:
                            rec.error(metric, exc)
                continue

            for dims in config.pca_dims:
                feature = f"{strategy.spell()}|pca={dims if dims is not None else 'none'}"
                try:
                    if dims is not None:
                        usable = min(dims, base_emb.n_items - 1, base_emb.dim)
                        if usable < dims:
                            flags["pca_dims_clamped"] = flags.get("pca_dims_clamped", 0) + 1
                        model = fit_pca(base_emb, usable)
                        emb = transform(model, base_emb)
                    else:
                        emb = base_emb
                except GeomevalError as exc:
                    for mk in config.distance_metrics:
                        rec = _Recorder(report, ref.name, feature, mk)
                        for metric in config.metrics:
                            rec.error(metric, exc)
                    continue

                for mk in config.distance_metrics:
                    try:
                        dist, hit = _cached_distance(config, digest, feature, mk, emb)
                    except GeomevalError as exc:
                        rec = _Recorder(report, ref.name, feature, mk)
                        for metric in config.metrics:
                            rec.error(metric, exc)
                        continue
                    cache_hits += hit
                    cache_misses += not hit
                    for k, v in dist.flags.items():
                        flags[k] = flags.get(k, 0) + v
                    if compute_only:
                        continue

                    _score_matrix(
                        config, report, mk, ref.name, feature, dist, labels, flags, ids, perception_data
                    )

                    if config.dtw is not None:
                        try:
                            dtw_cfg = DtwConfig(**config.dtw)
                            reranked = dtw_rerank(dist, sequences, dtw_cfg, flags)
                            _score_matrix(
                                config, report, mk, ref.name, f"{feature}|dtw",
                                reranked, labels, flags, ids, perception_data,
                            )
                        except GeomevalError as exc:
                            rec = _Recorder(report, ref.name, f"{feature}|dtw", mk)
                            for metric in config.metrics:
                                rec.error(metric, exc)

                if config.clustering and not compute_only:
                    rec = _Recorder(report, ref.name, feature, "kmeans")
                    try:
                        n_classes = len(labels.class_index)
                        assign = kmeans(emb, k=max(2, n_classes), seed=config.seed)
                        scores = clustering_scores(assign, labels, flags=flags)
                        for name in ("nmi", "purity", "ari"):
                            rec.ok(name, scores[name])
                        rec.ok("weighted_purity", weighted_purity(assign, labels))
                    except GeomevalError as exc:
                        for name in ("nmi", "purity", "ari", "weighted_purity"):
                            rec.error(name, exc)

    report.metadata = {
        "package_version": __version__,
        "schema_version": 1,
        "seed": config.seed,
        "workers": config.workers,
        "flags": flags,
        "sanitization_counts": sanitization,
        "cache_hits": cache_hits,
        "cache_misses": cache_misses,
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    return report


def write_correlations_csv(path, score_names, matrix):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["score"] + list(score_names))
        for name, row in zip(score_names, matrix):
            w.writerow([name] + ["" if v is None else f"{v:.4f}" for v in row])
