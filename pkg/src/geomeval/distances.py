"""Single-pair distances and full pairwise matrices (cosine, euclidean, spearman).

Determinism contract: every pair's value is produced by a fixed-shape kernel
that depends only on the two rows involved, so the pairwise matrix is
byte-identical for any worker count and equals the N^2 loop of single-pair
calls exactly. Dot products therefore go through a zero-padded, fixed-size
GEMM block (BLAS edge kernels are shape-dependent, interior kernels are not),
and elementwise reductions run over the contiguous feature axis only.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import rankdata

from .data import DistanceMatrix, EmbeddingSet
from .errors import GeomevalError, ParameterError

EPS = 1e-12
METRIC_KINDS = ("cosine", "euclidean", "spearman")

# Fixed GEMM block edge; all dot-product blocks are padded to this size.
_BLOCK = 256
# Entries this close to zero are checked for exact row equality and snapped to 0.
_SNAP = 1e-9
# Full matrices above this row count do not fit the in-memory design.
MAX_MATRIX_ITEMS = 65_536


def rank_transform(v) -> np.ndarray:
    """1-based ranks with tied values averaged; sum is D(D+1)/2."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ParameterError(f"rank_transform needs a 1-D vector of length >= 2, got shape {v.shape}")
    return rankdata(v, method="average")


def _dot_blocks(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Dot products A @ B.T through a padded (_BLOCK x D) @ (D x _BLOCK) GEMM.

    Both inputs must have at most _BLOCK rows. Padding rows are zero; they
    keep every output entry on the interior GEMM kernel path, which makes
    each entry a pure function of its two rows.
    """
    a, b = A.shape[0], B.shape[0]
    Ap = np.zeros((_BLOCK, A.shape[1]), dtype=np.float64)
    Bp = np.zeros((_BLOCK, B.shape[1]), dtype=np.float64)
    Ap[:a] = A
    Bp[:b] = B
    return (Ap @ Bp.T)[:a, :b]


def _row_norms(X: np.ndarray) -> np.ndarray:
    # np.add.reduce over the contiguous last axis reduces each row
    # independently of the row count (pairwise summation per run).
    sq = X * X
    return np.sqrt(np.add.reduce(sq, axis=1))


def _unit_rows(X: np.ndarray):
    """Rows scaled to unit norm; zero-norm rows stay zero (flagged by caller)."""
    norms = _row_norms(X)
    zero = norms <= 0.0
    out = X / np.maximum(norms, EPS)[:, None]
    return out, zero


def _prepare(X: np.ndarray, metric: str):
    """Metric-specific row preparation shared by all call paths.

    Returns (rows, kind, n_flagged_rows): for cosine/spearman the rows are
    unit-normalized (zero rows for degenerate inputs, which then land at
    distance 1 from everything, per the orthogonal convention); euclidean
    rows pass through unchanged.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if metric == "euclidean":
        return X, "sub", 0
    if metric == "cosine":
        U, zero = _unit_rows(X)
        return U, "dot", int(zero.sum())
    if metric == "spearman":
        R = rankdata(X, axis=1, method="average")
        Rc = R - R.mean(axis=1, keepdims=True)
        U, zero = _unit_rows(Rc)
        return U, "dot", int(zero.sum())
    raise ParameterError(f"unknown metric {metric!r}; expected one of {METRIC_KINDS}")


def _block_values(P: np.ndarray, I: slice, J: slice, kind: str) -> np.ndarray:
    """Distances for prepared rows P[I] x P[J]; the deterministic kernel."""
    A, B = P[I], P[J]
    if kind == "sub":
        # Chunk the row axis to bound the (a, b, D) temporary; the per-pair
        # reduction over the contiguous feature axis is shape-independent.
        out = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
        step = 32
        for r0 in range(0, A.shape[0], step):
            diff = A[r0 : r0 + step, None, :] - B[None, :, :]
            out[r0 : r0 + step] = np.sqrt(np.add.reduce(diff * diff, axis=2))
        return out
    d = 1.0 - _dot_blocks(A, B)
    # Near-zero entries from bitwise-equal prepared rows snap to exactly 0
    # (identical vectors, or positively parallel ones under cosine).
    near = np.argwhere(np.abs(d) < _SNAP)
    for i, j in near:
        if np.array_equal(A[i], B[j]):
            d[i, j] = 0.0
    return np.clip(d, 0.0, 2.0)


def distance(u, v, metric: str, flags: dict | None = None) -> float:
    """Distance between two equal-length vectors (>= 2 entries, finite)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1 or u.shape[0] < 2:
        raise ParameterError(f"need two equal-length 1-D vectors of length >= 2, got {u.shape} and {v.shape}")
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise ParameterError("distance inputs must be finite")
    P, kind, n_flagged = _prepare(np.stack([u, v]), metric)
    if flags is not None and n_flagged:
        flags[f"{metric}_degenerate_vectors"] = flags.get(f"{metric}_degenerate_vectors", 0) + n_flagged
    return float(_block_values(P, slice(0, 1), slice(1, 2), kind)[0, 0])


def pairwise_matrix(
    emb, metric: str, n_workers: int = 1, dtype=np.float64
) -> DistanceMatrix:
    """Full symmetric pairwise distance matrix over an EmbeddingSet.

    Each unordered pair is computed once (upper triangle, in fixed-size
    blocks) and mirrored; the diagonal is exactly zero. Work is distributed
    over ``n_workers`` threads with disjoint output regions, so the result
    does not depend on the worker count.
    """
    X = emb.matrix if isinstance(emb, EmbeddingSet) else np.asarray(emb)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ParameterError(f"pairwise_matrix needs an N x D matrix with N >= 2, got {X.shape}")
    n = X.shape[0]
    if n > MAX_MATRIX_ITEMS:
        raise GeomevalError(
            f"N={n} exceeds the in-memory pairwise limit of {MAX_MATRIX_ITEMS}; "
            "evaluate per subset or shard the dataset"
        )
    P, kind, n_flagged = _prepare(X, metric)

    # Blocks are computed in float64 and rounded on assignment, so a float32
    # matrix never needs a transient float64 twin.
    out = np.empty((n, n), dtype=dtype)
    starts = list(range(0, n, _BLOCK))

    def fill(i0: int, j0: int):
        I = slice(i0, min(i0 + _BLOCK, n))
        J = slice(j0, min(j0 + _BLOCK, n))
        vals = _block_values(P, I, J, kind)
        if i0 == j0:
            # Mirror the block's upper triangle into its lower half so the
            # full matrix is bit-symmetric by construction.
            il = np.tril_indices(vals.shape[0], -1)
            vals[il] = vals.T[il]
        out[I, J] = vals
        if i0 != j0:
            out[J, I] = vals.T

    tasks = [(i0, j0) for i0 in starts for j0 in starts if j0 >= i0]
    if n_workers <= 1:
        for i0, j0 in tasks:
            fill(i0, j0)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(lambda t: fill(*t), tasks))

    np.fill_diagonal(out, 0.0)

    flags = {}
    if n_flagged:
        flags[f"{metric}_degenerate_vectors"] = n_flagged
        flags["flagged_pairs"] = n_flagged * (n - n_flagged) + n_flagged * (n_flagged - 1) // 2
    return DistanceMatrix(values=out, metric_name=metric, flags=flags)
