"""Rank correlation between metrics across feature configurations."""

from __future__ import annotations

import math

import numpy as np

from .distances import rank_transform
from .errors import ParameterError

# Scores eligible for the cross-metric correlation; all are oriented
# higher-is-better after the CSCF flip below.
CORRELATABLE = (
    "p_at_1",
    "p_at_5",
    "gsr",
    "csr",
    "cs",
    "cscf",
    "silhouette",
    "nmi",
    "purity",
    "ari",
    "weighted_purity",
)


def _spearman(u: np.ndarray, v: np.ndarray):
    ru, rv = rank_transform(u), rank_transform(v)
    su, sv = ru.std(), rv.std()
    if su == 0.0 or sv == 0.0:
        return None
    return float(np.corrcoef(ru, rv)[0, 1])


def metric_correlation(rows) -> tuple[list[str], list[list[float | None]]]:
    """Spearman rho between per-score summary vectors over feature configs.

    Each configuration's score is macro-averaged across subsets first; raw
    CSCF values are flipped to 1 - raw so every correlated score reads
    higher-is-better. Needs >= 3 configurations covering the same subsets
    and scores. Pairs with a constant score vector come back as None.
    """
    table: dict[tuple[str, str, str], float] = {}
    cluster_rows = []
    for r in rows:
        if r.get("status", "ok") != "ok" or r.get("score") not in CORRELATABLE:
            continue
        v = float(r["value"])
        if r["score"] == "cscf":
            v = 1.0 - v
        if r.get("metric_kind") == "kmeans":
            cluster_rows.append((r["feature"], r["subset"], r["score"], v))
            continue
        # Distance kinds are part of a configuration's identity.
        feature = f"{r['feature']}|{r.get('metric_kind', '')}"
        table[(feature, r["subset"], r["score"])] = v

    features = sorted({f for f, _, _ in table})
    # Clustering scores describe the embedding itself, not a distance kind;
    # attach them to every distance configuration of the same feature.
    for feat, subset, score, v in cluster_rows:
        for f in features:
            if f.rsplit("|", 1)[0] == feat:
                table[(f, subset, score)] = v
    subsets = sorted({s for _, s, _ in table})
    scores = sorted(
        {
            sc
            for sc in {x for _, _, x in table}
            if all((f, s, sc) in table for f in features for s in subsets)
        }
    )
    if len(features) < 3:
        raise ParameterError(f"metric correlation needs >= 3 feature configs, found {len(features)}")
    if len(scores) < 2:
        raise ParameterError("metric correlation needs >= 2 scores shared by every config and subset")

    summary = np.empty((len(features), len(scores)))
    for i, f in enumerate(features):
        for j, sc in enumerate(scores):
            summary[i, j] = math.fsum(table[(f, s, sc)] for s in subsets) / len(subsets)

    matrix: list[list[float | None]] = []
    for a in range(len(scores)):
        row: list[float | None] = []
        for b in range(len(scores)):
            row.append(1.0 if a == b else _spearman(summary[:, a], summary[:, b]))
        matrix.append(row)
    return scores, matrix
