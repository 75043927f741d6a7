"""Empirical chance calibration by label permutation, and label-noise sweeps.

Randomness comes from counter-based Philox streams keyed by (seed, draw
index), so results are independent of scheduling and platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LabelSet
from .errors import DegenerateDataError, GeomevalError, ParameterError
from .metrics import gsr, precision_at_k

BASELINE_METRICS = ("p_at_1", "p_at_5", "gsr")


@dataclass(frozen=True)
class PermutationResult:
    observed: float
    baseline_mean: float
    ci_low: float
    ci_high: float
    p_value: float
    n_permutations: int
    seed: int
    n_retries: int = 0


def _substream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _metric_value(metric_id: str, dist, labels: LabelSet, min_class_size: int) -> float:
    if metric_id == "p_at_1":
        return precision_at_k(dist, labels, ks=(1,))[1]
    if metric_id == "p_at_5":
        return precision_at_k(dist, labels, ks=(5,))[5]
    if metric_id == "gsr":
        return gsr(dist, labels, min_class_size)
    raise ParameterError(f"metric_id must be one of {BASELINE_METRICS}, got {metric_id!r}")


def permutation_baseline(
    dist,
    labels: LabelSet,
    metric_id: str,
    n_permutations: int = 1000,
    seed: int = 0,
    min_class_size: int = 2,
) -> PermutationResult:
    """Null distribution of a metric under uniformly shuffled labels.

    The distance matrix stays fixed; each permutation re-labels the items
    and recomputes the metric. Degenerate permutations are retried with a
    fresh shuffle from the same substream (capped at 10x n_permutations
    attempts overall; pure shuffles preserve class sizes, so retries are
    not expected for these metrics).
    """
    if metric_id not in BASELINE_METRICS:
        raise ParameterError(f"metric_id must be one of {BASELINE_METRICS}, got {metric_id!r}")
    if n_permutations < 100:
        raise ParameterError(f"n_permutations must be >= 100, got {n_permutations}")

    observed = _metric_value(metric_id, dist, labels, min_class_size)
    base_labels = list(labels.labels)
    n = len(base_labels)

    # P@k fast path: with every label valid, the neighbor sets never change
    # across permutations, so only the label lookups are redone.
    neighbors = None
    if metric_id in ("p_at_1", "p_at_5") and len(labels.valid_indices()) == n:
        from .metrics import _top_k_sets, _values

        k = 1 if metric_id == "p_at_1" else 5
        codes0 = labels.codes()
        neighbors = _top_k_sets(_values(dist), k)

    scores = np.empty(n_permutations)
    attempts = 0
    cap = 10 * n_permutations
    for i in range(n_permutations):
        rng = _substream(seed, i)
        while True:
            attempts += 1
            if attempts > cap:
                raise GeomevalError(
                    f"permutation baseline exceeded {cap} attempts (degenerate shuffles)"
                )
            perm = rng.permutation(n)
            try:
                if neighbors is not None:
                    pc = codes0[perm]
                    scores[i] = (pc[neighbors] == pc[:, None]).mean()
                else:
                    shuffled = LabelSet([base_labels[j] for j in perm])
                    scores[i] = _metric_value(metric_id, dist, shuffled, min_class_size)
                break
            except DegenerateDataError:
                continue

    mean = math.fsum(scores) / n_permutations
    ci_low, ci_high = np.percentile(scores, [2.5, 97.5])
    p_value = float((scores >= observed).sum() / n_permutations)
    return PermutationResult(
        observed=float(observed),
        baseline_mean=float(mean),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        p_value=p_value,
        n_permutations=n_permutations,
        seed=seed,
        n_retries=attempts - n_permutations,
    )


def flip_labels(labels: LabelSet, fraction: float, rng: np.random.Generator) -> LabelSet:
    """Uniformly re-label ceil(fraction * N_labeled) items with a different
    observed class (self-assignment excluded)."""
    if not (0.0 <= fraction < 1.0):
        raise ParameterError(f"flip fraction must be in [0, 1), got {fraction}")
    names = sorted(labels.class_index)
    if len(names) < 2:
        raise ParameterError("need at least 2 classes to flip labels")
    valid = labels.valid_indices()
    n_flip = math.ceil(fraction * len(valid))
    out = list(labels.labels)
    if n_flip == 0:
        return LabelSet(out)
    targets = rng.choice(valid, size=n_flip, replace=False)
    for t in targets:
        others = [c for c in names if c != out[t]]
        out[t] = others[int(rng.integers(len(others)))]
    return LabelSet(out)


def label_noise_sweep(
    dist,
    labels: LabelSet,
    fractions,
    metric_ids=("p_at_1", "gsr"),
    seed: int = 0,
    min_class_size: int = 2,
) -> dict:
    """Metric values after flipping a rising fraction of labels.

    Returns {fraction: {metric_id: value}}; fraction 0 reproduces the clean
    scores. Each fraction draws its flips from its own substream.
    """
    fractions = [float(f) for f in fractions]
    if sorted(fractions) != fractions:
        raise ParameterError("fractions must be sorted ascending")
    for m in metric_ids:
        if m not in BASELINE_METRICS:
            raise ParameterError(f"unsupported metric_id {m!r}; expected one of {BASELINE_METRICS}")
    if len(labels.class_index) < 2:
        raise ParameterError("need at least 2 classes to flip labels")

    out = {}
    for fi, frac in enumerate(fractions):
        noisy = flip_labels(labels, frac, _substream(seed, fi))
        out[frac] = {m: _metric_value(m, dist, noisy, min_class_size) for m in metric_ids}
    return out
