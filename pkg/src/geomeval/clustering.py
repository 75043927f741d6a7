"""Deterministic k-means plus cluster-vs-label agreement scores.

Assignments round-trip through CSV (clip_id,cluster_id with -1 for noise),
so externally produced clusterings can be scored through the same
interface.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingSet, LabelSet
from .errors import DegenerateDataError, FormatError, GeomevalError, ParameterError

NOISE = -1


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster ids per item in [0, k), or -1 for noise (externally imported
    assignments only; k-means never emits noise)."""

    assignments: np.ndarray
    k: int

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.intp)
        if a.ndim != 1:
            raise ParameterError("assignments must be a 1-D integer array")
        if ((a < -1) | (a >= self.k)).any():
            raise ParameterError(f"cluster ids must be in [-1, {self.k})")
        object.__setattr__(self, "assignments", a)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _sq_dists_to(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = X[:, None, :] - C[None, :, :]
    return np.add.reduce(d * d, axis=2)


def kmeans(
    data, k: int, seed: int = 0, max_iter: int = 300, inertia_history: list | None = None
) -> ClusterAssignment:
    """Lloyd iterations from seeded distance-weighted initialization.

    Deterministic given the seed: assignment ties go to the lowest cluster
    id, an emptied cluster is re-seeded at the point currently farthest from
    its own centroid (lowest index on ties), and there is no worker knob to
    vary reduction order. Pass a list as ``inertia_history`` to record the
    assignment-step inertia of every iteration.
    """
    X = data.matrix if isinstance(data, EmbeddingSet) else np.asarray(data, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if not (2 <= k <= n):
        raise ParameterError(f"k must be in [2, {n}], got {k}")

    rng = _rng(seed)
    centroids = np.empty((k, X.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    chosen[first] = True
    d2 = np.add.reduce((X - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            pick = int(rng.choice(n, p=d2 / total))
        else:
            pick = int(np.flatnonzero(~chosen)[0])  # duplicate points left
        centroids[c] = X[pick]
        chosen[pick] = True
        d2 = np.minimum(d2, np.add.reduce((X - centroids[c]) ** 2, axis=1))

    assign = np.full(n, -1, dtype=np.intp)
    for _ in range(max_iter):
        dist2 = _sq_dists_to(X, centroids)
        new_assign = np.argmin(dist2, axis=1)  # first minimum = lowest id
        point_d2 = dist2[np.arange(n), new_assign]
        if inertia_history is not None:
            inertia_history.append(float(point_d2.sum()))

        counts = np.bincount(new_assign, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            d2_work = point_d2.copy()
            for c in empties:
                far = int(np.argmax(d2_work))
                new_assign[far] = c
                d2_work[far] = -1.0
            counts = np.bincount(new_assign, minlength=k)

        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        onehot = np.zeros((n, k))
        onehot[np.arange(n), assign] = 1.0
        centroids = (onehot.T @ X) / counts[:, None]
    return ClusterAssignment(assignments=assign, k=k)


def inertia(data, result: ClusterAssignment) -> float:
    """Sum of squared distances to each point's cluster mean."""
    X = data.matrix if isinstance(data, EmbeddingSet) else np.asarray(data, dtype=np.float64)
    total = 0.0
    for c in range(result.k):
        rows = np.flatnonzero(result.assignments == c)
        if rows.size:
            mu = X[rows].mean(axis=0)
            total += float(((X[rows] - mu) ** 2).sum())
    return total


def _contingency(assign: ClusterAssignment, labels: LabelSet):
    """Counts over (cluster, class) for rows that are non-noise and labeled."""
    a = assign.assignments
    if len(a) != len(labels):
        raise ParameterError("assignments and labels are not row-aligned")
    codes = labels.codes()
    keep = (a != NOISE) & (codes >= 0)
    if not keep.any():
        raise DegenerateDataError("no rows are both clustered and labeled")
    a, codes = a[keep], codes[keep]
    table = np.zeros((assign.k, codes.max() + 1), dtype=np.int64)
    np.add.at(table, (a, codes), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def clustering_scores(assign: ClusterAssignment, labels: LabelSet, flags: dict | None = None) -> dict:
    """NMI (natural logs, geometric normalization), Purity, and ARI.

    Noise rows are excluded. The degenerate single-cluster/single-class case
    defines NMI as 1 and is flagged.
    """
    table = _contingency(assign, labels)
    n = table.sum()
    row = table.sum(axis=1)
    col = table.sum(axis=0)

    hu, hv = _entropy(row), _entropy(col)
    if hu == 0.0 and hv == 0.0:
        nmi = 1.0
        if flags is not None:
            flags["nmi_degenerate"] = flags.get("nmi_degenerate", 0) + 1
    elif hu == 0.0 or hv == 0.0:
        nmi = 0.0
    else:
        mi = 0.0
        nz = np.argwhere(table > 0)
        for i, j in nz:
            pij = table[i, j] / n
            mi += pij * math.log(pij / ((row[i] / n) * (col[j] / n)))
        nmi = mi / math.sqrt(hu * hv)

    purity = float(table.max(axis=1).sum() / n)

    def c2(x):
        return x * (x - 1) // 2

    sum_ij = int(sum(c2(v) for v in table.ravel()))
    sum_a = int(sum(c2(v) for v in row))
    sum_b = int(sum(c2(v) for v in col))
    n2 = c2(int(n))
    expected = sum_a * sum_b / n2 if n2 else 0.0
    denom = 0.5 * (sum_a + sum_b) - expected
    ari = 1.0 if denom == 0 else (sum_ij - expected) / denom

    return {"nmi": float(nmi), "purity": purity, "ari": float(ari)}


def write_assignments_csv(path, ids, assign: ClusterAssignment):
    if len(ids) != len(assign.assignments):
        raise ParameterError("ids and assignments are not row-aligned")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["clip_id", "cluster_id"])
        for clip_id, c in zip(ids, assign.assignments):
            w.writerow([clip_id, int(c)])


def read_assignments_csv(path, ids) -> ClusterAssignment:
    """Load assignments row-aligned with ``ids``; -1 marks noise. Every id
    must be present exactly once."""
    table = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"clip_id", "cluster_id"} <= set(reader.fieldnames or []):
            raise FormatError(f"{path}: need columns clip_id,cluster_id")
        for ln, row in enumerate(reader, start=2):
            try:
                table[row["clip_id"]] = int(row["cluster_id"])
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: bad cluster id {row['cluster_id']!r}") from exc
    missing = [c for c in ids if c not in table]
    if missing:
        raise FormatError(f"{path}: no assignment for {missing[:3]}{'...' if len(missing) > 3 else ''}")
    values = np.array([table[c] for c in ids], dtype=np.intp)
    k = int(values.max()) + 1 if (values >= 0).any() else 1
    return ClusterAssignment(assignments=values, k=max(k, 1))


def weighted_purity(assign: ClusterAssignment, labels: LabelSet) -> float:
    """Size-weighted mean of per-cluster majority fractions, noise excluded."""
    a = assign.assignments
    if (a != NOISE).sum() == 0:
        raise DegenerateDataError("all points are noise")
    table = _contingency(assign, labels)
    sizes = table.sum(axis=1)
    best = table.max(axis=1)
    total = sizes.sum()
    if total == 0:
        raise GeomevalError("no labeled members in any non-noise cluster")
    return float(best.sum() / total)
