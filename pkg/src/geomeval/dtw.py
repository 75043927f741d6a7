"""Banded multi-dimensional DTW and shortlist re-ranking of pooled distances.

Sequences are truncated to their valid frames, per-frame L2-normalized, and
temporally subsampled before alignment; re-ranking additionally projects
frames with label-free PCA fitted on the whole subset's stacked frames
(outputs are not re-normalized afterwards).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DistanceMatrix, SequenceEmbedding
from .distances import EPS
from .errors import ParameterError
from .pca import fit_pca

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class DtwConfig:
    band_radius: float = 0.1
    stride: int = 3
    shortlist_size: int = 200
    pca_dims: int = 64
    normalize_path: bool = True

    def __post_init__(self):
        if not (0.0 < self.band_radius <= 1.0):
            raise ParameterError(f"band_radius must be in (0, 1], got {self.band_radius}")
        if self.stride < 1:
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        if self.shortlist_size < 1:
            raise ParameterError(f"shortlist_size must be >= 1, got {self.shortlist_size}")
        if self.pca_dims < 1:
            raise ParameterError(f"pca_dims must be >= 1, got {self.pca_dims}")


def _normalize_frames(frames: np.ndarray) -> np.ndarray:
    F = np.ascontiguousarray(frames, dtype=np.float64)
    norms = np.sqrt((F * F).sum(axis=1))
    return F / np.maximum(norms, EPS)[:, None]


def _prepare(seq: SequenceEmbedding, stride: int) -> np.ndarray:
    return _normalize_frames(seq.frames[: seq.valid_len])[::stride]


def _band_windows(n: int, m: int, radius_frac: float, flags: dict | None = None):
    """Per-row column windows [lo_i, hi_i] around the rescaled diagonal
    j ~ i * (m/n), widened minimally when the corridor cannot connect the
    corners."""
    w0 = radius_frac * max(n, m)
    slope = m / n
    w = max(w0, 0.5, abs(1.0 - slope), (slope - 1.0) / 2.0)
    centers = np.arange(n) * slope
    while True:
        lo = np.clip(np.ceil(centers - w), 0, m - 1).astype(np.int64)
        hi = np.clip(np.floor(centers + w), 0, m - 1).astype(np.int64)
        ok = (
            lo[0] == 0
            and hi[-1] == m - 1
            and (lo <= hi).all()
            and (lo[1:] <= hi[:-1] + 1).all()
        )
        if ok:
            break
        w += 0.5
    if w > w0 and flags is not None:
        flags["dtw_band_widened"] = flags.get("dtw_band_widened", 0) + 1
    return lo, hi


def _dp_python(A, B, lo, hi, normalize):
    n, m, d = A.shape[0], B.shape[0], A.shape[1]
    INF = math.inf
    cost = [[INF] * m for _ in range(n)]
    plen = [[0] * m for _ in range(n)]
    for i in range(n):
        for j in range(int(lo[i]), int(hi[i]) + 1):
            s = 0.0
            for t in range(d):
                diff = A[i, t] - B[j, t]
                s += diff * diff
            c = math.sqrt(s)
            if i == 0 and j == 0:
                cost[0][0] = c
                plen[0][0] = 1
                continue
            best, bl = INF, 0
            if i > 0 and j > 0 and cost[i - 1][j - 1] < INF:
                best, bl = cost[i - 1][j - 1], plen[i - 1][j - 1]
            if i > 0 and cost[i - 1][j] < INF:
                v, l = cost[i - 1][j], plen[i - 1][j]
                if v < best or (v == best and l < bl):
                    best, bl = v, l
            if j > 0 and cost[i][j - 1] < INF:
                v, l = cost[i][j - 1], plen[i][j - 1]
                if v < best or (v == best and l < bl):
                    best, bl = v, l
            if best < INF:
                cost[i][j] = best + c
                plen[i][j] = bl + 1
    total, length = cost[n - 1][m - 1], plen[n - 1][m - 1]
    return total / length if normalize else total


if _HAVE_NUMBA:

    @njit(cache=False)
    def _dp_numba(A, B, lo, hi, normalize):  # pragma: no cover - thin jit twin
        n, m, d = A.shape[0], B.shape[0], A.shape[1]
        INF = np.inf
        cost = np.full((n, m), INF)
        plen = np.zeros((n, m), dtype=np.int64)
        for i in range(n):
            for j in range(lo[i], hi[i] + 1):
                s = 0.0
                for t in range(d):
                    diff = A[i, t] - B[j, t]
                    s += diff * diff
                c = math.sqrt(s)
                if i == 0 and j == 0:
                    cost[0, 0] = c
                    plen[0, 0] = 1
                    continue
                best, bl = INF, np.int64(0)
                if i > 0 and j > 0 and cost[i - 1, j - 1] < INF:
                    best, bl = cost[i - 1, j - 1], plen[i - 1, j - 1]
                if i > 0 and cost[i - 1, j] < INF:
                    v, l = cost[i - 1, j], plen[i - 1, j]
                    if v < best or (v == best and l < bl):
                        best, bl = v, l
                if j > 0 and cost[i, j - 1] < INF:
                    v, l = cost[i, j - 1], plen[i, j - 1]
                    if v < best or (v == best and l < bl):
                        best, bl = v, l
                if best < INF:
                    cost[i, j] = best + c
                    plen[i, j] = bl + 1
        total, length = cost[n - 1, m - 1], plen[n - 1, m - 1]
        return total / length if normalize else total


def _dtw_core(A: np.ndarray, B: np.ndarray, band_radius: float, normalize: bool,
              flags: dict | None = None) -> float:
    """DP over the banded local-cost lattice.

    Moves are diagonal / down / right; cost ties between predecessors prefer
    the shorter path, then diagonal over down over right. Path-length
    normalization divides by the number of cells on the optimal path.
    """
    if A.shape[0] < 1 or B.shape[0] < 1:
        raise ParameterError("DTW needs at least one frame per sequence")
    if A.shape[1] != B.shape[1]:
        raise ParameterError(f"frame dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    lo, hi = _band_windows(A.shape[0], B.shape[0], band_radius, flags)
    if _HAVE_NUMBA:
        return float(_dp_numba(A, B, lo, hi, normalize))
    return float(_dp_python(A, B, lo, hi, normalize))


def dtw_distance(a: SequenceEmbedding, b: SequenceEmbedding, config: DtwConfig,
                 flags: dict | None = None) -> float:
    """Sequence distance between two clips (no PCA; see dtw_rerank for that)."""
    A = _prepare(a, config.stride)
    B = _prepare(b, config.stride)
    return _dtw_core(A, B, config.band_radius, config.normalize_path, flags)


def _shortlists(pooled: DistanceMatrix, size: int) -> list[np.ndarray]:
    values = pooled.effective_values()
    n = values.shape[0]
    m = min(size, n - 1)
    out = []
    for i in range(n):
        row = np.array(values[i], dtype=np.float64)
        row[i] = np.inf
        thr = np.partition(row, m - 1)[m - 1]
        cand = np.flatnonzero(row <= thr)
        order = cand[np.argsort(row[cand], kind="stable")]
        out.append(order[:m])
    return out


def dtw_rerank(
    pooled_dist: DistanceMatrix,
    sequences: list[SequenceEmbedding],
    config: DtwConfig,
    flags: dict | None = None,
) -> DistanceMatrix:
    """Replace each query's top-M pooled candidates with true DTW distances.

    Frames are PCA-projected (label-free, fitted on all sequences' stacked
    normalized frames) before alignment. If both directions of a pair are
    shortlisted, the smaller DTW value wins. Entries outside every shortlist
    keep their pooled value and are masked so metrics rank them after all
    shortlisted entries.
    """
    n = pooled_dist.n_items
    if len(sequences) != n:
        raise ParameterError(f"{len(sequences)} sequences for a {n}-row distance matrix")

    normed = [_normalize_frames(s.frames[: s.valid_len]) for s in sequences]
    d = normed[0].shape[1]
    stacked = np.concatenate(normed, axis=0)
    dims = min(config.pca_dims, d, stacked.shape[0] - 1)
    if dims >= 1 and dims < d:
        model = fit_pca(stacked, dims)
        normed = [(f - model.mean) @ model.components.T for f in normed]
    elif flags is not None:
        flags["dtw_pca_skipped"] = flags.get("dtw_pca_skipped", 0) + 1
    prepared = [np.ascontiguousarray(f[:: config.stride]) for f in normed]

    shortlists = _shortlists(pooled_dist, config.shortlist_size)
    directed: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in shortlists[i]:
            j = int(j)
            if (j, i) in directed and prepared[i].shape[0] == prepared[j].shape[0]:
                directed[(i, j)] = directed[(j, i)]  # symmetric band, equal lengths
                continue
            directed[(i, j)] = _dtw_core(
                prepared[i], prepared[j], config.band_radius, config.normalize_path, flags
            )

    values = np.array(pooled_dist.values, dtype=np.float64)
    mask = np.zeros((n, n), dtype=bool)
    np.fill_diagonal(mask, True)
    pairs = {(min(i, j), max(i, j)) for (i, j) in directed}
    for i, j in sorted(pairs):
        cands = [directed[k] for k in ((i, j), (j, i)) if k in directed]
        v = min(cands)
        values[i, j] = values[j, i] = v
        mask[i, j] = mask[j, i] = True
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(
        values=values,
        metric_name=f"dtw+{pooled_dist.metric_name}",
        flags=dict(pooled_dist.flags),
        shortlist_mask=mask,
    )
