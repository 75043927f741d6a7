"""
Scoring distances against behavioral judgments
==============================================

Two forced-choice protocols: the probe task asks which of two references a
probe sits closer to, the triplet task checks d(anchor, positive) <
d(anchor, negative). Accuracy is tested against 50% chance with an exact
one-sided binomial tail.
"""

import numpy as np

from geomeval.distances import pairwise_matrix
from geomeval.perception import ProbeTrial, Triplet, binomial_test, probe_2afc, triplet_eval

rng = np.random.default_rng(5)

# geometry: two clusters of "syllables" the subject reliably distinguishes
ids = [f"syl{i}" for i in range(20)]
X = np.concatenate([rng.standard_normal((10, 4)), 6.0 + rng.standard_normal((10, 4))])
dm = pairwise_matrix(X, "euclidean")

# the subject judged same-cluster sounds as more similar on most trials;
# probes alternate clusters so the recorded decisions vary
trials, triplets = [], []
for t in range(60):
    probe_cluster = t % 2
    x = int(rng.integers(10)) + 10 * probe_cluster
    a = int(rng.integers(10))             # reference in cluster 0
    b = int(rng.integers(10, 20))         # reference in cluster 1
    if x in (a, b):
        continue
    true_choice = "A" if probe_cluster == 0 else "B"
    noisy = rng.random() < 0.15           # occasional inconsistent answer
    trials.append(ProbeTrial(ids[x], ids[a], ids[b],
                             ("B" if true_choice == "A" else "A") if noisy else true_choice))
    p, n = int(rng.integers(10)), int(rng.integers(10, 20))
    anchor = int(rng.integers(10))
    if len({anchor, p, n}) == 3:
        triplets.append(Triplet(ids[anchor], ids[p], ids[n]))

probe = probe_2afc(dm, trials, ids)
print(f"probe task: accuracy {probe['accuracy']:.3f} over {probe['n_trials']} trials, "
      f"p = {probe['p_value']:.2e}")
print(f"  rank correlations (rho {probe['spearman_rho']:.3f}, "
      f"tau {probe['kendall_tau']:.3f}); {probe['correlation_convention']}")

trip = triplet_eval(dm, triplets, ids)
print(f"triplet task: accuracy {trip['accuracy']:.3f} over {trip['n_triplets']} triplets, "
      f"p = {trip['p_value']:.2e}")

# the binomial tail itself, exact at any size
print("\nexact binomial tails at chance 0.5:")
for k, n in [(15, 20), (20, 20), (55, 100)]:
    print(f"  P[K >= {k} | n={n}] = {binomial_test(k, n):.6f}")
