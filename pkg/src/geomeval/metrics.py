"""Training-free geometry scores over a distance matrix and labels.

Shared conventions:
- empty-string labels are invalid; such items never enter any score;
- neighbor ties break by ascending item index;
- per-point means are accumulated with math.fsum in ascending index order,
  so scores do not depend on iteration scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import DistanceMatrix, LabelSet
from .distances import EPS
from .errors import DegenerateDataError, ParameterError

METRIC_IDS = ("p_at_1", "p_at_5", "gsr", "csr", "cs", "cscf", "silhouette")


@dataclass(frozen=True)
class PointSeparation:
    """Per-point distances behind GSR/CSR: average and maximum intra-class
    distance, nearest inter-class distance, and the local separation score."""

    avg_id: float
    nid: float
    mid: float
    local_score: float


@dataclass
class MetricScores:
    p_at_k: dict = field(default_factory=dict)
    gsr: float | None = None
    csr: float | None = None
    cs: float | None = None
    cscf: float | None = None
    silhouette: float | None = None
    n_evaluable: int = 0


def _values(dist) -> np.ndarray:
    if isinstance(dist, DistanceMatrix):
        return dist.effective_values()
    return np.asarray(dist)


def _check_alignment(values: np.ndarray, labels: LabelSet):
    if values.shape[0] != len(labels):
        raise ParameterError(
            f"distance matrix has {values.shape[0]} rows but labels cover {len(labels)} items"
        )


def _top_k_sets(values: np.ndarray, kmax: int) -> np.ndarray:
    """Indices of each row's kmax nearest neighbors, self excluded.

    Ties in distance resolve to the lower item index (stable sort over an
    exact candidate set, so no tie is lost to partitioning).
    """
    n = values.shape[0]
    out = np.empty((n, kmax), dtype=np.intp)
    for i in range(n):
        row = np.array(values[i], dtype=np.float64)
        row[i] = np.inf
        thr = np.partition(row, kmax - 1)[kmax - 1]
        cand = np.flatnonzero(row <= thr)
        order = cand[np.argsort(row[cand], kind="stable")]
        out[i] = order[:kmax]
    return out


def precision_at_k(dist, labels: LabelSet, ks=(1, 5)) -> dict:
    """P@k: mean fraction of an item's k nearest neighbors sharing its class.

    Only unlabeled items are excluded; every labeled item is both a query
    and a candidate neighbor.
    """
    values = _values(dist)
    _check_alignment(values, labels)
    ks = sorted(set(int(k) for k in ks))
    valid = labels.valid_indices()
    n_eval = len(valid)
    if n_eval < 2:
        raise DegenerateDataError("P@k needs at least 2 labeled items")
    for k in ks:
        if not (1 <= k <= n_eval - 1):
            raise ParameterError(f"k={k} outside [1, {n_eval - 1}] for {n_eval} evaluable items")

    sub = values[np.ix_(valid, valid)]
    codes = labels.codes()[valid]
    neighbors = _top_k_sets(sub, max(ks))
    same = codes[neighbors] == codes[:, None]
    return {k: float(same[:, :k].sum() / (n_eval * k)) for k in ks}


def _evaluable_for_separation(labels: LabelSet, min_class_size: int):
    if min_class_size < 2:
        raise ParameterError("min_class_size must be >= 2 so intra-class distances exist")
    keep_classes = sorted(c for c, rows in labels.class_index.items() if len(rows) >= min_class_size)
    if not keep_classes:
        raise DegenerateDataError(f"no class reaches min_class_size={min_class_size}")
    idx = np.array(sorted(i for c in keep_classes for i in labels.class_index[c]), dtype=np.intp)
    return idx, keep_classes


def separation_stats(dist, labels: LabelSet, min_class_size: int = 2):
    """Per-point Avg_ID / NID / MID over the evaluable items.

    Returns ``(indices, stats)`` where ``indices`` are the original row
    numbers of the evaluable items (ascending) and ``stats`` maps
    'avg_id' / 'nid' / 'mid' to aligned float arrays. Items without valid
    labels or in classes below ``min_class_size`` are excluded entirely:
    they neither receive scores nor serve as inter-class candidates.
    """
    values = _values(dist)
    _check_alignment(values, labels)
    idx, keep_classes = _evaluable_for_separation(labels, min_class_size)
    if len(keep_classes) < 2:
        raise DegenerateDataError(
            "separation scores need at least 2 evaluable classes (nearest inter-class "
            "distance is undefined otherwise)"
        )
    sub = values[np.ix_(idx, idx)]
    local = labels.restricted(idx)
    n = len(idx)

    avg_id = np.empty(n)
    nid = np.empty(n)
    mid = np.empty(n)
    for cname in sorted(local.class_index):
        rows = np.array(local.class_index[cname], dtype=np.intp)
        own = sub[np.ix_(rows, rows)].astype(np.float64)
        avg_id[rows] = own.sum(axis=1) / (len(rows) - 1)
        np.fill_diagonal(own, -np.inf)
        mid[rows] = own.max(axis=1)
        others = sub[rows].astype(np.float64)
        others[:, rows] = np.inf
        nid[rows] = others.min(axis=1)
    return idx, {"avg_id": avg_id, "nid": nid, "mid": mid}


def point_separations(dist, labels: LabelSet, min_class_size: int = 2) -> list[PointSeparation]:
    """Per-point separation records (evaluable items, ascending index)."""
    _, stats = separation_stats(dist, labels, min_class_size)
    local = (stats["nid"] - stats["avg_id"]) / (stats["nid"] + stats["avg_id"] + EPS)
    return [
        PointSeparation(float(a), float(n), float(m), float(s))
        for a, n, m, s in zip(stats["avg_id"], stats["nid"], stats["mid"], local)
    ]


def gsr(dist, labels: LabelSet, min_class_size: int = 2) -> float:
    """Global separation rate in [0, 100].

    Per point: (NID - Avg_ID) / (NID + Avg_ID + eps); the mean over
    evaluable points is mapped to [0, 1] and scaled by 100.
    """
    _, stats = separation_stats(dist, labels, min_class_size)
    local = (stats["nid"] - stats["avg_id"]) / (stats["nid"] + stats["avg_id"] + EPS)
    mean = math.fsum(local) / len(local)
    return 100.0 * 0.5 * (mean + 1.0)


def csr(dist, labels: LabelSet, min_class_size: int = 2) -> float:
    """Class separation ratio in [0, 1]: like GSR but against the furthest
    intra-class distance, aggregated per class then size-weighted."""
    idx, stats = separation_stats(dist, labels, min_class_size)
    local = (stats["nid"] - stats["mid"]) / (stats["nid"] + stats["mid"] + EPS)
    members = labels.restricted(idx)
    total = 0.0
    n_total = 0
    for cname in sorted(members.class_index):
        rows = np.array(members.class_index[cname], dtype=np.intp)
        total += len(rows) * (math.fsum(local[rows]) / len(rows))
        n_total += len(rows)
    raw = total / n_total
    return 0.5 * (raw + 1.0)


def _class_pair_stats(dist, labels: LabelSet, min_class_size: int):
    """Per-class AvgIntra and per-ordered-pair AvgInter over valid classes."""
    values = _values(dist)
    _check_alignment(values, labels)
    if min_class_size < 2:
        raise ParameterError("min_class_size must be >= 2 so intra-class distances exist")
    names = sorted(c for c, rows in labels.class_index.items() if len(rows) >= min_class_size)
    if len(names) < 2:
        raise DegenerateDataError("need at least 2 classes of min_class_size for class-pair scores")
    rows = {c: np.array(labels.class_index[c], dtype=np.intp) for c in names}
    # Exactly rounded sums (fsum): the averages do not depend on summation
    # order, so CSCF's strict AvgInter < AvgIntra comparison is stable even
    # when class averages tie exactly (common under spearman, where distances
    # take few discrete values).
    avg_intra = {}
    for c in names:
        r = rows[c]
        block = values[np.ix_(r, r)].astype(np.float64)
        avg_intra[c] = math.fsum(block.ravel()) / (len(r) * (len(r) - 1))
    avg_inter = {}
    for ci in names:
        for cj in names:
            if ci == cj:
                continue
            block = values[np.ix_(rows[ci], rows[cj])].astype(np.float64)
            avg_inter[(ci, cj)] = math.fsum(block.ravel()) / block.size
    return names, avg_intra, avg_inter


def f_value_cs(dist, labels: LabelSet, min_class_size: int = 2) -> float:
    """CS score in [0, 1]: mean over ordered class pairs of S/(1+S), with
    S = AvgInter(C_i, C_j) / (AvgIntra(C_i) + eps)."""
    names, avg_intra, avg_inter = _class_pair_stats(dist, labels, min_class_size)
    vals = []
    for ci in names:
        for cj in names:
            if ci == cj:
                continue
            s = avg_inter[(ci, cj)] / (avg_intra[ci] + EPS)
            vals.append(s / (1.0 + s))
    return math.fsum(vals) / len(vals)


def cscf(dist, labels: LabelSet, min_class_size: int = 2) -> float:
    """Raw confusion fraction in [0, 1] (lower is better): share of ordered
    class pairs where AvgInter(C_i, C_j) < AvgIntra(C_i)."""
    names, avg_intra, avg_inter = _class_pair_stats(dist, labels, min_class_size)
    confused = sum(
        1
        for ci in names
        for cj in names
        if ci != cj and avg_inter[(ci, cj)] < avg_intra[ci]
    )
    m = len(names)
    return confused / (m * (m - 1))


def silhouette(dist, labels: LabelSet, flags: dict | None = None) -> float:
    """Mean silhouette over labeled items, classes as clusters.

    b(i) is the mean distance to the nearest other class; singleton classes
    contribute s(i) = 0 (counted in ``flags['silhouette_singletons']``).
    """
    values = _values(dist)
    _check_alignment(values, labels)
    valid = labels.valid_indices()
    if len(valid) < 2:
        raise DegenerateDataError("silhouette needs at least 2 labeled items")
    local = labels.restricted(valid)
    names = sorted(local.class_index)
    if len(names) < 2:
        raise DegenerateDataError("silhouette needs at least 2 classes")
    sub = values[np.ix_(valid, valid)]
    n = len(valid)

    # means[i, c]: mean distance from item i to class c's members.
    means = np.empty((n, len(names)))
    sizes = np.empty(len(names), dtype=np.intp)
    col_of = {}
    for c, cname in enumerate(names):
        rows = np.array(local.class_index[cname], dtype=np.intp)
        sizes[c] = len(rows)
        means[:, c] = sub[:, rows].sum(axis=1, dtype=np.float64) / len(rows)
        for r in rows:
            col_of[int(r)] = c

    s = np.zeros(n)
    n_singletons = 0
    for i in range(n):
        c = col_of[i]
        if sizes[c] < 2:
            n_singletons += 1
            continue
        a = means[i, c] * sizes[c] / (sizes[c] - 1)  # self-distance 0 excluded
        b = np.inf
        for j in range(len(names)):
            if j != c and means[i, j] < b:
                b = means[i, j]
        denom = max(a, b)
        s[i] = (b - a) / denom if denom > 0 else 0.0
    if flags is not None and n_singletons:
        flags["silhouette_singletons"] = flags.get("silhouette_singletons", 0) + n_singletons
    return math.fsum(s) / n


def compute_scores(
    dist,
    labels: LabelSet,
    ks=(1, 5),
    min_class_size: int = 2,
    which=METRIC_IDS,
    flags: dict | None = None,
) -> MetricScores:
    """All requested scores in one pass-friendly call."""
    out = MetricScores(n_evaluable=len(labels.valid_indices()))
    wanted = set(which)
    p_ks = sorted(int(w.split("_at_")[1]) for w in wanted if w.startswith("p_at_"))
    if p_ks:
        out.p_at_k = precision_at_k(dist, labels, p_ks)
    if "gsr" in wanted:
        out.gsr = gsr(dist, labels, min_class_size)
    if "csr" in wanted:
        out.csr = csr(dist, labels, min_class_size)
    if "cs" in wanted:
        out.cs = f_value_cs(dist, labels, min_class_size)
    if "cscf" in wanted:
        out.cscf = cscf(dist, labels, min_class_size)
    if "silhouette" in wanted:
        out.silhouette = silhouette(dist, labels, flags=flags)
    return out
