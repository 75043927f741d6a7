"""Core data model: sequence embeddings, pooled sets, labels, distance matrices.

All arrays are plain numpy; objects are immutable by convention after
construction and safe to share read-only across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeomevalError, ParameterError


@dataclass(frozen=True)
class SequenceEmbedding:
    """One clip's frame-level features: a T x D matrix plus a valid-frame count.

    ``valid_len`` marks the leading non-padding frames (1 <= valid_len <= T).
    ``sanitized`` counts non-finite entries that were replaced at load time.
    """

    frames: np.ndarray
    valid_len: int
    clip_id: str
    sanitized: int = 0

    def __post_init__(self):
        f = self.frames
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
            raise ParameterError(f"frames must be a nonempty 2-D matrix, got shape {f.shape}")
        if not (1 <= self.valid_len <= f.shape[0]):
            raise ParameterError(
                f"valid_len {self.valid_len} outside [1, {f.shape[0]}] for clip {self.clip_id!r}"
            )
        if not np.isfinite(f).all():
            raise ParameterError(f"non-finite frames in clip {self.clip_id!r} (sanitize at load)")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class EmbeddingSet:
    """N pooled vectors of dimension D, row-aligned with clip ids."""

    matrix: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] < 2:
            raise ParameterError(f"need an N x D matrix with N >= 2, got shape {m.shape}")
        if len(self.ids) != m.shape[0]:
            raise ParameterError("ids not row-aligned with matrix")
        if len(set(self.ids)) != len(self.ids):
            raise ParameterError("clip ids must be unique")
        if not np.isfinite(m).all():
            raise ParameterError("embedding matrix contains non-finite values")
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n_items(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


class LabelSet:
    """Per-item class labels plus the derived class -> member-rows index.

    Empty-string labels are treated as invalid and excluded from
    ``class_index`` (and hence from every metric's evaluable set).
    """

    def __init__(self, labels):
        self.labels = tuple(str(x) for x in labels)
        index: dict[str, list[int]] = {}
        for i, lab in enumerate(self.labels):
            if lab == "":
                continue
            index.setdefault(lab, []).append(i)
        self.class_index = {c: tuple(rows) for c, rows in index.items()}

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_index)

    def valid_indices(self) -> np.ndarray:
        """Row indices carrying a valid (non-empty) label, ascending."""
        return np.array([i for i, lab in enumerate(self.labels) if lab != ""], dtype=np.intp)

    def codes(self) -> np.ndarray:
        """Integer class codes per row; -1 for invalid labels.

        Codes follow the sorted order of class names, so they are stable
        under row permutation.
        """
        names = sorted(self.class_index)
        lookup = {c: k for k, c in enumerate(names)}
        return np.array([lookup.get(lab, -1) for lab in self.labels], dtype=np.intp)

    def restricted(self, indices) -> "LabelSet":
        """LabelSet for a row subset (used when slicing a distance matrix)."""
        return LabelSet([self.labels[i] for i in indices])


@dataclass
class DistanceMatrix:
    """Symmetric nonnegative N x N distances with zero diagonal.

    ``flags`` counts per-pair anomalies (zero-norm vectors under cosine,
    constant vectors under spearman, ...). ``shortlist_mask`` is set by DTW
    re-ranking: True where the entry carries a sequence distance; masked-out
    entries keep their pooled value but rank after every shortlisted one
    (see :meth:`effective_values`).
    """

    values: np.ndarray
    metric_name: str
    flags: dict = field(default_factory=dict)
    shortlist_mask: np.ndarray | None = None

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise ParameterError(f"distance matrix must be square with N >= 2, got {v.shape}")

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    def validate(self, atol: float = 0.0):
        """Full invariant check (O(N^2)); raises on violation."""
        v = self.values
        if not np.isfinite(v).all():
            raise GeomevalError("distance matrix contains non-finite values")
        if (v < 0).any():
            raise GeomevalError("distance matrix contains negative values")
        if np.abs(np.diagonal(v)).max(initial=0.0) > atol:
            raise GeomevalError("distance matrix diagonal is not zero")
        if atol == 0.0:
            if not np.array_equal(v, v.T):
                raise GeomevalError("distance matrix is not symmetric")
        elif np.abs(v - v.T).max() > atol:
            raise GeomevalError("distance matrix is not symmetric")

    def effective_values(self) -> np.ndarray:
        """Values as consumed by metrics.

        Without a shortlist mask this is ``values`` itself. With one, masked
        (beyond-shortlist) entries are shifted beyond the largest shortlisted
        distance, preserving their relative order; the diagonal stays zero.
        """
        if self.shortlist_mask is None:
            return self.values
        v = self.values
        mask = self.shortlist_mask
        off = ~np.eye(v.shape[0], dtype=bool)
        short_max = v[mask & off].max() if (mask & off).any() else 0.0
        out = np.where(mask, v, short_max + 1.0 + v)
        np.fill_diagonal(out, 0.0)
        return out


@dataclass(frozen=True)
class ManifestItem:
    clip_id: str
    label: str
    duration_seconds: float
    embedding_path: str


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered list of clips in a subset, with labels, durations and tensor paths."""

    items: tuple[ManifestItem, ...]
    subset_name: str

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def labels(self) -> LabelSet:
        return LabelSet([it.label for it in self.items])

    def durations(self) -> np.ndarray:
        return np.array([it.duration_seconds for it in self.items], dtype=np.float64)
