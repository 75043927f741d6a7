"""
Pairwise distances and the training-free geometry scores
========================================================

Three distance lenses (cosine, euclidean, spearman) over the same pooled
vectors, then the whole metric family on the resulting matrix: local
neighborhood purity (P@k), boundary integrity (GSR, CSR), class-pair mass
separation (CS, CSCF), and cluster coherence (silhouette).
"""

import numpy as np

from geomeval.data import LabelSet
from geomeval.distances import distance, pairwise_matrix, rank_transform
from geomeval.metrics import compute_scores, point_separations

# --- single pairs ----------------------------------------------------------
u, v = np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0])
print("ranks of [10, 20, 20, 5]:", rank_transform([10, 20, 20, 5]))
for metric in ("cosine", "euclidean", "spearman"):
    print(f"d_{metric}(u, v) = {distance(u, v, metric):.4f}")

# --- a 3-class synthetic subset --------------------------------------------
rng = np.random.default_rng(7)
centers = 2.0 * rng.standard_normal((3, 10))
X = np.concatenate([c + 0.8 * rng.standard_normal((15, 10)) for c in centers])
labels = LabelSet([f"class{i // 15}" for i in range(45)])

for metric in ("cosine", "euclidean", "spearman"):
    dm = pairwise_matrix(X, metric)
    scores = compute_scores(dm, labels, ks=(1, 5))
    print(f"\n[{metric}]")
    print(f"  P@1 {scores.p_at_k[1]:.3f}  P@5 {scores.p_at_k[5]:.3f}")
    print(f"  GSR {scores.gsr:.2f}  CSR {scores.csr:.3f}  CS {scores.cs:.3f} "
          f"CSCF {scores.cscf:.3f}  silhouette {scores.silhouette:.3f}")

# --- per-point anatomy of GSR ----------------------------------------------
dm = pairwise_matrix(X, "euclidean")
seps = point_separations(dm, labels)
worst = min(range(len(seps)), key=lambda i: seps[i].local_score)
s = seps[worst]
print(f"\nleast separated point: Avg_ID {s.avg_id:.2f}, NID {s.nid:.2f}, "
      f"local score {s.local_score:+.3f}")
print("(negative local score = a foreign point sits inside this point's class spread)")
