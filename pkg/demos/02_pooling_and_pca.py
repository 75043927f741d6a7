"""
Pooling a frame sequence and whitening the pooled set
=====================================================

A frozen encoder hands us a T x D activation matrix per clip. Retrieval
wants one vector per clip, so we pool: over time, over features, or both
concatenated (the pipeline default). Pooled sets are then projected with
label-free PCA fitted on the evaluation subset itself, which corrects the
"representation cone" anisotropy of foundation-model features.
"""

import numpy as np

from geomeval.data import EmbeddingSet, SequenceEmbedding
from geomeval.pca import fit_pca, transform
from geomeval.pooling import KINDS, DEFAULT_STRATEGY, PoolingStrategy, pool

# --- one toy sequence through every pooling kind --------------------------
frames = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 0.0]], dtype=np.float32)
seq = SequenceEmbedding(frames=frames, valid_len=2, clip_id="toy")  # row 3 is padding

for kind in KINDS:
    vec = pool(seq, PoolingStrategy(kind))
    print(f"{kind:24s} -> {np.round(vec, 3)}")

print(f"\ndefault strategy {DEFAULT_STRATEGY.spell()!r}:")
print("  ", pool(seq, DEFAULT_STRATEGY))  # time-mean then feature-mean, concatenated

# --- whitening an anisotropic cloud ---------------------------------------
# embeddings squashed into a narrow cone: one direction dominates
rng = np.random.default_rng(0)
base = rng.standard_normal((200, 8))
cone = base * np.array([20.0, 5.0, 1.0, 1.0, 0.5, 0.5, 0.2, 0.1]) + 30.0

emb = EmbeddingSet(matrix=cone, ids=tuple(f"c{i}" for i in range(200)))
model = fit_pca(emb, target_dims=4)
proj = transform(model, emb)

print("\nexplained variance of the top directions:", np.round(model.explained_variance, 2))
print("projected shape:", proj.matrix.shape)
print("projected means ~ 0:", np.allclose(proj.matrix.mean(axis=0), 0, atol=1e-9))

cov = np.cov(proj.matrix, rowvar=False)
off_diag = np.abs(cov - np.diag(np.diag(cov))).max()
print(f"projected covariance is diagonal (max off-diagonal {off_diag:.2e})")
