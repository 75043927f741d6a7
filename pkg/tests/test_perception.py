import math

import numpy as np
import pytest

from geomeval.data import DistanceMatrix
from geomeval.errors import DegenerateDataError, ParameterError
from geomeval.perception import (
    ProbeTrial,
    Triplet,
    binomial_test,
    probe_2afc,
    read_triplets_csv,
    read_trials_csv,
    triplet_eval,
)

from oracles import exact_binomial_tail, naive_kendall_tau_b, naive_spearman_rho


def _dm(values):
    return DistanceMatrix(values=np.asarray(values, dtype=np.float64), metric_name="test")


# ---------------------------------------------------------------- binomial

def test_all_successes_closed_form():
    for n in (1, 5, 20):
        assert binomial_test(n, n, 0.5) == pytest.approx(0.5**n, rel=1e-14)


def test_zero_successes_full_tail():
    assert binomial_test(0, 10, 0.5) == 1.0
    assert binomial_test(0, 1, 0.3) == 1.0


def test_fifteen_of_twenty():
    expected = sum(math.comb(20, k) for k in range(15, 21)) / 2**20
    assert binomial_test(15, 20, 0.5) == pytest.approx(expected, rel=1e-13)
    assert f"{expected:.5f}" == "0.02069"


def test_matches_exact_tail_for_all_small_cases():
    for n in range(1, 31):
        for s in range(0, n + 1):
            got = binomial_test(s, n, 0.5)
            assert got == pytest.approx(exact_binomial_tail(s, n), rel=1e-12), (n, s)


def test_monotone_in_successes():
    for n in (7, 20):
        ps = [binomial_test(s, n, 0.5) for s in range(n + 1)]
        assert all(a >= b for a, b in zip(ps, ps[1:]))


def test_non_half_chance():
    from fractions import Fraction

    got = binomial_test(4, 9, 0.3)
    assert got == pytest.approx(exact_binomial_tail(4, 9, Fraction(3, 10)), rel=1e-12)


def test_binomial_validation():
    with pytest.raises(ParameterError):
        binomial_test(5, 4, 0.5)
    with pytest.raises(ParameterError):
        binomial_test(1, 0, 0.5)
    with pytest.raises(ParameterError):
        binomial_test(1, 2, 1.0)


# ---------------------------------------------------------------- probe task

def _probe_setup():
    # rows: x, a, b; d(x,a) = 1, d(x,b) = 2
    values = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 9.0], [2.0, 9.0, 0.0]])
    return _dm(values), ["x", "a", "b"]


def test_probe_all_correct_twenty_trials():
    dm, ids = _probe_setup()
    trials = [ProbeTrial("x", "a", "b", "A")] * 20
    out = probe_2afc(dm, trials, ids)
    assert out["accuracy"] == 1.0
    assert out["p_value"] == pytest.approx(0.5**20, rel=1e-12)


def test_probe_ties_half_credit_flagged():
    values = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 9.0], [1.0, 9.0, 0.0]])
    out = probe_2afc(_dm(values), [ProbeTrial("x", "a", "b", "A")] * 4, ["x", "a", "b"])
    assert out["accuracy"] == 0.5
    assert out["n_ties"] == 4


def test_probe_half_correct_even_count():
    dm, ids = _probe_setup()
    trials = [ProbeTrial("x", "a", "b", "A")] * 5 + [ProbeTrial("x", "a", "b", "B")] * 5
    out = probe_2afc(dm, trials, ids)
    assert out["accuracy"] == 0.5
    assert out["p_value"] > 0.4


def test_probe_correlations_sign_convention():
    # choosing A must coincide with negative d(x,A) - d(x,B) for alignment
    values = np.zeros((4, 4))
    values[0, 1] = values[1, 0] = 1.0
    values[0, 2] = values[2, 0] = 2.0
    values[3, 1] = values[1, 3] = 2.0
    values[3, 2] = values[2, 3] = 1.0
    ids = ["x1", "a", "b", "x2"]
    trials = [ProbeTrial("x1", "a", "b", "A"), ProbeTrial("x2", "a", "b", "B")]
    out = probe_2afc(_dm(values), trials, ids)
    assert out["accuracy"] == 1.0
    assert out["spearman_rho"] == pytest.approx(-1.0)
    assert out["kendall_tau"] == pytest.approx(-1.0)


def test_probe_correlations_match_naive():
    rng = np.random.default_rng(0)
    n = 30
    values = np.abs(rng.standard_normal((n + 2, n + 2)))
    values = (values + values.T) / 2
    np.fill_diagonal(values, 0.0)
    ids = [f"x{i}" for i in range(n)] + ["a", "b"]
    trials = [ProbeTrial(f"x{i}", "a", "b", "A" if rng.random() < 0.5 else "B") for i in range(n)]
    out = probe_2afc(_dm(values), trials, ids)
    diffs = [values[i, n] - values[i, n + 1] for i in range(n)]
    decs = [1.0 if t.decision == "A" else -1.0 for t in trials]
    assert out["spearman_rho"] == pytest.approx(naive_spearman_rho(diffs, decs), abs=1e-12)
    assert out["kendall_tau"] == pytest.approx(naive_kendall_tau_b(diffs, decs), abs=1e-12)
    assert -1.0 <= out["kendall_tau"] <= 1.0


def test_probe_skips_unresolvable():
    dm, ids = _probe_setup()
    trials = [ProbeTrial("x", "a", "b", "A"), ProbeTrial("ghost", "a", "b", "A")]
    out = probe_2afc(dm, trials, ids)
    assert out["n_trials"] == 1 and out["n_skipped"] == 1
    with pytest.raises(DegenerateDataError):
        probe_2afc(dm, [ProbeTrial("ghost", "a", "b", "A")], ids)


def test_probe_invariant_under_monotone_distance_transform():
    dm, ids = _probe_setup()
    trials = [ProbeTrial("x", "a", "b", "A")] * 6
    out1 = probe_2afc(dm, trials, ids)
    transformed = _dm(np.expm1(dm.values))
    out2 = probe_2afc(transformed, trials, ids)
    assert out1["accuracy"] == out2["accuracy"]
    assert out1["p_value"] == out2["p_value"]


def test_trial_validation():
    with pytest.raises(ParameterError):
        ProbeTrial("x", "x", "b", "A")
    with pytest.raises(ParameterError):
        ProbeTrial("x", "a", "b", "C")


# ---------------------------------------------------------------- triplets

def test_triplets_all_agree():
    values = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 9.0], [2.0, 9.0, 0.0]])
    trips = [Triplet("a", "p", "n")] * 8
    out = triplet_eval(_dm(values), trips, ["a", "p", "n"])
    assert out["accuracy"] == 1.0
    assert out["p_value"] == pytest.approx(0.5**8, rel=1e-12)


def test_triplet_ties_half_credit():
    values = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 9.0], [1.0, 9.0, 0.0]])
    out = triplet_eval(_dm(values), [Triplet("a", "p", "n")] * 2, ["a", "p", "n"])
    assert out["accuracy"] == 0.5
    assert out["n_ties"] == 2


def test_random_distances_near_chance_monte_carlo():
    rng = np.random.default_rng(1)
    n_trials, n_sims = 200, 60
    accs, ps = [], []
    for _ in range(n_sims):
        values = np.abs(rng.standard_normal((40, 40)))
        values = (values + values.T) / 2
        np.fill_diagonal(values, 0.0)
        ids = [f"c{i}" for i in range(40)]
        trips = []
        while len(trips) < n_trials:
            a, p, ng = rng.choice(40, 3, replace=False)
            trips.append(Triplet(f"c{a}", f"c{p}", f"c{ng}"))
        out = triplet_eval(_dm(values), trips, ids)
        accs.append(out["accuracy"])
        ps.append(out["p_value"])
    # accuracy: binomial mean 0.5, sd 0.5/sqrt(n_trials); average over sims
    se = 0.5 / math.sqrt(n_trials * n_sims)
    assert abs(np.mean(accs) - 0.5) < 3 * se
    # p-values roughly uniform: mean 0.5 within 3 sigma of uniform spread
    assert abs(np.mean(ps) - 0.5) < 3 * (1 / math.sqrt(12 * n_sims)) + 0.05


def test_triplet_invariant_under_monotone_distance_transform():
    values = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 9.0], [2.0, 9.0, 0.0]])
    trips = [Triplet("a", "p", "n")] * 5
    out1 = triplet_eval(_dm(values), trips, ["a", "p", "n"])
    out2 = triplet_eval(_dm(np.expm1(values)), trips, ["a", "p", "n"])
    assert (out1["accuracy"], out1["p_value"]) == (out2["accuracy"], out2["p_value"])


def test_triplet_distinct_ids_enforced():
    with pytest.raises(ParameterError):
        Triplet("a", "a", "n")


def test_csv_readers(tmp_path):
    trials_csv = tmp_path / "trials.csv"
    trials_csv.write_text("x_id,a_id,b_id,decision\nx,a,b,A\nx,a,b,B\n")
    trips_csv = tmp_path / "triplets.csv"
    trips_csv.write_text("anchor_id,positive_id,negative_id\na,p,n\n")
    assert len(read_trials_csv(trials_csv)) == 2
    assert read_triplets_csv(trips_csv)[0].anchor_id == "a"
