"""Pooling strategies that collapse a T x D sequence into one fixed vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SequenceEmbedding
from .distances import EPS
from .errors import DegenerateDataError, ParameterError

KINDS = (
    "mean_time_incl_pad",
    "mean_time_masked",
    "mean_feat",
    "first_time",
    "first_feat",
    "last_time",
    "max_time",
    "attention_magnitude",
)


@dataclass(frozen=True)
class PoolingStrategy:
    """A pooling kind, optionally concatenated with a second one.

    The CLI spelling is the kind name itself, or ``"a+b"`` for a
    concatenation (second part appended to the first).
    """

    kind: str
    concat_with: str | None = None

    def __post_init__(self):
        for k in (self.kind, self.concat_with):
            if k is not None and k not in KINDS:
                raise ParameterError(f"unknown pooling kind {k!r}; expected one of {KINDS}")

    @classmethod
    def parse(cls, text: str) -> "PoolingStrategy":
        parts = text.split("+")
        if len(parts) == 1:
            return cls(parts[0])
        if len(parts) == 2:
            return cls(parts[0], parts[1])
        raise ParameterError(f"cannot parse pooling strategy {text!r} (at most one '+')")

    def spell(self) -> str:
        return self.kind if self.concat_with is None else f"{self.kind}+{self.concat_with}"


# The pipeline default: time mean over all frames (padding included)
# concatenated with the per-frame feature mean.
DEFAULT_STRATEGY = PoolingStrategy("mean_time_incl_pad", "mean_feat")


def _pool_one(seq: SequenceEmbedding, kind: str) -> np.ndarray:
    F = seq.frames.astype(np.float64)
    if kind == "mean_time_incl_pad":
        return F.mean(axis=0)
    if kind == "mean_time_masked":
        if seq.valid_len < 1:
            raise DegenerateDataError(f"clip {seq.clip_id!r}: no valid frames for masked mean")
        return F[: seq.valid_len].mean(axis=0)
    if kind == "mean_feat":
        return F.mean(axis=1)
    if kind == "first_time":
        return F[0].copy()
    if kind == "first_feat":
        return F[:, 0].copy()
    if kind == "last_time":
        return F[-1].copy()
    if kind == "max_time":
        return F.max(axis=0)
    if kind == "attention_magnitude":
        norms = np.sqrt((F * F).sum(axis=1))
        w = norms / (norms.sum() + EPS)
        return (w[:, None] * F).sum(axis=0)
    raise ParameterError(f"unknown pooling kind {kind!r}")


def pool(seq: SequenceEmbedding, strategy: PoolingStrategy) -> np.ndarray:
    """Fixed-length vector for one sequence under the given strategy."""
    out = _pool_one(seq, strategy.kind)
    if strategy.concat_with is not None:
        out = np.concatenate([out, _pool_one(seq, strategy.concat_with)])
    return out


def stack_pooled(vectors: list[np.ndarray]):
    """Stack pooled vectors into an N x D matrix.

    Strategies with T-length parts produce ragged outputs when sequence
    lengths differ across a subset; shorter vectors are zero-padded to the
    longest. Returns ``(matrix, n_padded)``.
    """
    if not vectors:
        raise ParameterError("nothing to stack")
    lengths = {v.shape[0] for v in vectors}
    if len(lengths) == 1:
        return np.stack(vectors), 0
    width = max(lengths)
    out = np.zeros((len(vectors), width), dtype=np.float64)
    n_padded = 0
    for i, v in enumerate(vectors):
        out[i, : v.shape[0]] = v
        n_padded += v.shape[0] != width
    return out, n_padded
