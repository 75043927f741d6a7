"""Label-free transductive PCA fitted on a subset's own pooled vectors.

"Whitening" here is projection only; per-component unit-variance rescaling is
available behind an explicit flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .data import EmbeddingSet
from .errors import ParameterError

# Exact eigendecomposition of the D x D covariance up to this width;
# iterative top-k beyond it.
_EXACT_DIM_LIMIT = 2048
_ZERO_VARIANCE_TOL = 1e-15


@dataclass(frozen=True)
class PcaModel:
    """Mean, orthonormal components (rows), and their explained variances."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    degenerate: bool = False
    rank_deficient: bool = False
    whiten: bool = False

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def _as_matrix(data) -> np.ndarray:
    X = data.matrix if isinstance(data, EmbeddingSet) else np.asarray(data)
    if X.ndim != 2:
        raise ParameterError(f"expected an N x D matrix, got shape {X.shape}")
    return np.ascontiguousarray(X, dtype=np.float64)


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each component's largest-magnitude entry positive (first on ties)."""
    out = components.copy()
    for r in range(out.shape[0]):
        idx = int(np.argmax(np.abs(out[r])))
        if out[r, idx] < 0:
            out[r] = -out[r]
    return out


def fit_pca(data, target_dims: int, whiten: bool = False) -> PcaModel:
    """Top ``target_dims`` principal directions of the mean-centered data.

    Deterministic up to the sign convention (largest-magnitude entry of each
    component made positive). Zero-variance data yields an all-zero model
    flagged degenerate; requesting more dimensions than the centered rank
    keeps the surplus components with zero variance and flags the model.
    """
    X = _as_matrix(data)
    n, d = X.shape
    if n < 2:
        raise ParameterError(f"need at least 2 rows to fit, got {n}")
    if not (1 <= target_dims <= min(n - 1, d)):
        raise ParameterError(
            f"target_dims must be in [1, min(N-1, D)] = [1, {min(n - 1, d)}], got {target_dims}"
        )

    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (n - 1)

    if d <= _EXACT_DIM_LIMIT:
        evals, evecs = scipy.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][:target_dims]
        variances = evals[order]
        components = evecs[:, order].T
    else:
        evals, evecs = scipy.sparse.linalg.eigsh(
            cov, k=target_dims, which="LA", v0=np.ones(d), tol=1e-9
        )
        order = np.argsort(evals)[::-1]
        variances = evals[order]
        components = evecs[:, order].T

    variances = np.maximum(variances, 0.0)
    total = float(np.trace(cov))
    if total <= _ZERO_VARIANCE_TOL:
        return PcaModel(
            mean=mean,
            components=np.zeros((target_dims, d)),
            explained_variance=np.zeros(target_dims),
            degenerate=True,
            whiten=whiten,
        )
    rank_deficient = bool((variances <= _ZERO_VARIANCE_TOL * max(total, 1.0)).any())
    return PcaModel(
        mean=mean,
        components=_fix_signs(components),
        explained_variance=variances,
        rank_deficient=rank_deficient,
        whiten=whiten,
    )


def transform(model: PcaModel, data):
    """Project rows onto the model's components: ``(x - mean) @ components.T``.

    An EmbeddingSet in yields an EmbeddingSet out (ids preserved); a plain
    array yields an array.
    """
    X = _as_matrix(data)
    if X.shape[1] != model.dim:
        raise ParameterError(f"data has {X.shape[1]} columns, model expects {model.dim}")
    Z = (X - model.mean) @ model.components.T
    if model.whiten:
        scale = np.sqrt(np.maximum(model.explained_variance, _ZERO_VARIANCE_TOL))
        Z = Z / scale
    if isinstance(data, EmbeddingSet):
        return EmbeddingSet(matrix=Z, ids=data.ids)
    return Z


def inverse_transform(model: PcaModel, Z) -> np.ndarray:
    """Map projected coordinates back: ``z @ components + mean``."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != model.n_components:
        raise ParameterError(f"expected N x {model.n_components} coordinates, got {Z.shape}")
    if model.whiten:
        scale = np.sqrt(np.maximum(model.explained_variance, _ZERO_VARIANCE_TOL))
        Z = Z * scale
    return Z @ model.components + model.mean
