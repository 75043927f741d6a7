"""
Interchange tensor files, manifests, and dataset filtering
===========================================================

Every producer (feature extractors, cache writers) and consumer in this
toolkit speaks one tiny binary format: an 8-byte magic, a JSON header, and
row-major little-endian float32 values. This script writes a few files,
reads them back, and walks through the two-stage dataset filter.
"""

import os
import tempfile

import numpy as np

from geomeval.data import DatasetManifest, ManifestItem
from geomeval.io import (
    filter_dataset,
    load_sequence_set,
    read_tensor,
    write_manifest,
    write_tensor,
)

workdir = tempfile.mkdtemp(prefix="geomeval_demo_")
print(f"working in {workdir}")

# --- write one clip's frame sequence (T x D) and read it back ------------
frames = np.random.default_rng(0).standard_normal((12, 8)).astype(np.float32)
path = os.path.join(workdir, "clip0.gevl")
write_tensor(path, frames, valid_len=9)  # last 3 frames are padding
back, valid_len, header = read_tensor(path)
print("round trip bit-exact:", np.array_equal(back, frames), "| header:", header)

# --- sanitization: loaders replace NaN/Inf and count what they touched ---
dirty = frames.copy()
dirty[0, 0], dirty[1, 1] = np.nan, np.inf
bad_path = os.path.join(workdir, "clip1.gevl")
write_tensor(bad_path, dirty)

items = [
    ManifestItem("clip0", "robin", 2.0, path),
    ManifestItem("clip1", "robin", 2.5, bad_path),
]
manifest = DatasetManifest(items=tuple(items), subset_name="demo")
for seq in load_sequence_set(manifest):
    print(f"{seq.clip_id}: shape {seq.frames.shape}, valid {seq.valid_len}, "
          f"sanitized entries {seq.sanitized}")

# --- filtering: duration outliers first, then undersized classes ---------
rng = np.random.default_rng(1)
items = [ManifestItem(f"a{i}", "wren", 1.0 + rng.random(), "") for i in range(40)]
items += [ManifestItem(f"b{i}", "finch", 1.0 + rng.random(), "") for i in range(8)]
items += [ManifestItem(f"c{i}", "rare", 1.0, "") for i in range(3)]
items += [ManifestItem("marathon", "wren", 500.0, "")]  # duration outlier
big = DatasetManifest(items=tuple(items), subset_name="demo")

kept = filter_dataset(big, min_class_size=6, duration_percentile=98.0)
print(f"\nbefore: {len(big)} items, after: {len(kept)}")
print("classes kept:", sorted({it.label for it in kept.items}))
print("the 500 s outlier and the 3-item class are gone")

# manifests round-trip through CSV with paths relative to the CSV itself
csv_path = os.path.join(workdir, "manifest.csv")
write_manifest(csv_path, manifest)
print(f"\nwrote {csv_path}")
