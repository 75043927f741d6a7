"""
Unsupervised agreement scores and sequence-aware re-ranking
===========================================================

Two complementary views beyond plain distances: (1) run k-means with k set
to the true class count and score the found clusters against the labels;
(2) keep the encoder frozen but swap the distance function, re-ranking each
query's pooled shortlist with banded dynamic time warping over the frame
sequences.
"""

import numpy as np

from geomeval.clustering import clustering_scores, kmeans, weighted_purity
from geomeval.data import LabelSet, SequenceEmbedding
from geomeval.distances import pairwise_matrix
from geomeval.dtw import DtwConfig, dtw_distance, dtw_rerank
from geomeval.metrics import precision_at_k

rng = np.random.default_rng(3)

# --- k-means agreement -------------------------------------------------------
centers = 4.0 * rng.standard_normal((4, 6))
X = np.concatenate([c + 0.6 * rng.standard_normal((12, 6)) for c in centers])
labels = LabelSet([f"type{i // 12}" for i in range(48)])

assign = kmeans(X, k=4, seed=0)
scores = clustering_scores(assign, labels)
print("k-means vs ground truth:")
print(f"  NMI {scores['nmi']:.3f}  purity {scores['purity']:.3f}  ARI {scores['ari']:.3f}")
print(f"  weighted purity {weighted_purity(assign, labels):.3f}")

# --- DTW basics ----------------------------------------------------------------
a = SequenceEmbedding(np.array([[0.0], [0.0], [1.0]], dtype=np.float32), 3, "a")
b = SequenceEmbedding(np.array([[0.0], [1.0], [1.0]], dtype=np.float32), 3, "b")
wide = DtwConfig(band_radius=1.0, stride=1)
tight = DtwConfig(band_radius=1e-9, stride=1)  # widened to the minimum corridor
print(f"\nDTW wide band: {dtw_distance(a, b, wide):.4f} "
      f"(warping absorbs the misalignment)")
print(f"DTW forced diagonal: {dtw_distance(a, b, tight):.4f} "
      f"(= 1/3: one mismatched frame over a 3-cell path)")

# --- shortlist re-ranking -------------------------------------------------------
# sequences whose frame ORDER carries the class signal; time-mean pooling
# destroys it, DTW recovers it
t, d = 20, 6
motif = rng.standard_normal((t, d)).astype(np.float32)
seqs, labs = [], []
for i in range(24):
    flip = i % 2  # class 1 plays the motif backwards: same mean, different order
    frames = motif[::-1].copy() if flip else motif.copy()
    frames += 0.05 * rng.standard_normal((t, d)).astype(np.float32)
    seqs.append(SequenceEmbedding(frames, t, f"clip{i}"))
    labs.append(f"dir{flip}")
labels = LabelSet(labs)

pooled = np.stack([s.frames.mean(axis=0) for s in seqs])
pooled_dist = pairwise_matrix(pooled, "cosine")
before = precision_at_k(pooled_dist, labels, ks=(1,))[1]

config = DtwConfig(band_radius=0.2, stride=1, shortlist_size=23, pca_dims=4)
reranked = dtw_rerank(pooled_dist, seqs, config)
after = precision_at_k(reranked, labels, ks=(1,))[1]
print(f"\nP@1 pooled {before:.2f} -> DTW re-ranked {after:.2f}")
print("(order-reversed motifs have identical time-means; alignment separates them)")
