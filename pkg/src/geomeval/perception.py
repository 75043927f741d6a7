"""Behavioral-alignment tasks: 2AFC probe trials and triplet agreement.

Both tasks read distances out of a precomputed matrix, score agreement with
the recorded decisions, and attach an exact one-sided binomial test against
50% chance. Distance ties earn half credit and are counted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import kendalltau, spearmanr

from .data import DistanceMatrix
from .errors import DegenerateDataError, ParameterError


@dataclass(frozen=True)
class ProbeTrial:
    x_id: str
    a_id: str
    b_id: str
    decision: str

    def __post_init__(self):
        if self.decision not in ("A", "B"):
            raise ParameterError(f"decision must be 'A' or 'B', got {self.decision!r}")
        if self.x_id in (self.a_id, self.b_id):
            raise ParameterError(f"probe {self.x_id!r} must differ from both references")


@dataclass(frozen=True)
class Triplet:
    anchor_id: str
    positive_id: str
    negative_id: str

    def __post_init__(self):
        ids = (self.anchor_id, self.positive_id, self.negative_id)
        if len(set(ids)) != 3:
            raise ParameterError(f"triplet ids must be distinct, got {ids}")


def binomial_test(successes: int, n: int, chance: float = 0.5) -> float:
    """Exact one-sided upper-tail binomial probability P[K >= successes].

    Summed in log space for stability at large n.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not (0 <= successes <= n):
        raise ParameterError(f"successes must be in [0, {n}], got {successes}")
    if not (0.0 < chance < 1.0):
        raise ParameterError(f"chance must be in (0, 1), got {chance}")
    if successes == 0:
        return 1.0
    ks = np.arange(successes, n + 1)
    log_pmf = (
        math.lgamma(n + 1)
        - np.array([math.lgamma(k + 1) + math.lgamma(n - k + 1) for k in ks])
        + ks * math.log(chance)
        + (n - ks) * math.log1p(-chance)
    )
    return float(min(1.0, math.exp(logsumexp(log_pmf))))


def _row_lookup(dist: DistanceMatrix, ids) -> dict:
    if ids is None or len(ids) != dist.n_items:
        raise ParameterError("need one clip id per distance-matrix row")
    return {str(c): i for i, c in enumerate(ids)}


def _tail_p(credits: float, n: int) -> float:
    # Half-credit ties make the success count fractional; the tail is taken
    # at the next integer.
    return binomial_test(int(math.ceil(credits - 1e-9)), n, 0.5)


def probe_2afc(dist: DistanceMatrix, trials, ids) -> dict:
    """Score 2AFC trials: the model picks whichever reference is closer.

    Returns accuracy, its one-sided binomial p-value, and Spearman/Kendall
    (tau-b) correlations between d(X,A) - d(X,B) and the decision encoded
    +1 for A / -1 for B. Under that convention an aligned model yields
    negative correlations (choosing A goes with a negative difference).
    """
    lookup = _row_lookup(dist, ids)
    values = dist.effective_values()
    credits = 0.0
    n_used = n_skipped = n_ties = 0
    diffs, decisions = [], []
    for t in trials:
        try:
            x, a, b = lookup[t.x_id], lookup[t.a_id], lookup[t.b_id]
        except KeyError:
            n_skipped += 1
            continue
        n_used += 1
        da, db = float(values[x, a]), float(values[x, b])
        diffs.append(da - db)
        decisions.append(1.0 if t.decision == "A" else -1.0)
        if da == db:
            n_ties += 1
            credits += 0.5
        else:
            model = "A" if da < db else "B"
            credits += model == t.decision
    if n_used == 0:
        raise DegenerateDataError("no probe trial resolved to distance-matrix rows")

    rho = tau = float("nan")
    if len(set(diffs)) > 1 and len(set(decisions)) > 1:
        rho = float(spearmanr(diffs, decisions).statistic)
        tau = float(kendalltau(diffs, decisions, variant="b").statistic)
    return {
        "accuracy": credits / n_used,
        "p_value": _tail_p(credits, n_used),
        "spearman_rho": rho,
        "kendall_tau": tau,
        "n_trials": n_used,
        "n_skipped": n_skipped,
        "n_ties": n_ties,
        "correlation_convention": "negative correlation = model aligned with decisions",
    }


def triplet_eval(dist: DistanceMatrix, triplets, ids) -> dict:
    """Fraction of triplets with d(A,P) < d(A,N), plus its binomial p-value."""
    lookup = _row_lookup(dist, ids)
    values = dist.effective_values()
    credits = 0.0
    n_used = n_skipped = n_ties = 0
    for t in triplets:
        try:
            a, p, ng = lookup[t.anchor_id], lookup[t.positive_id], lookup[t.negative_id]
        except KeyError:
            n_skipped += 1
            continue
        n_used += 1
        dp, dn = float(values[a, p]), float(values[a, ng])
        if dp == dn:
            n_ties += 1
            credits += 0.5
        elif dp < dn:
            credits += 1.0
    if n_used == 0:
        raise DegenerateDataError("no triplet resolved to distance-matrix rows")
    return {
        "accuracy": credits / n_used,
        "p_value": _tail_p(credits, n_used),
        "n_triplets": n_used,
        "n_skipped": n_skipped,
        "n_ties": n_ties,
    }


def read_trials_csv(path) -> list[ProbeTrial]:
    """Trials CSV: x_id,a_id,b_id,decision."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ProbeTrial(row["x_id"], row["a_id"], row["b_id"], row["decision"]))
    return out


def read_triplets_csv(path) -> list[Triplet]:
    """Triplets CSV: anchor_id,positive_id,negative_id."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Triplet(row["anchor_id"], row["positive_id"], row["negative_id"]))
    return out
