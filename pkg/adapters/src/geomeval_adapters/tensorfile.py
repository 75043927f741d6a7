"""Writer for the evaluation engine's interchange formats.

Implemented against the published wire format, not against the engine's
code: 8-byte magic "GEOMEVL1", uint32-LE header length, JSON header
{"dtype":"f32","shape":[T,D],"valid_len":int}, then T*D float32 values in
row-major little-endian order. Manifests are CSV with header
clip_id,label,duration_seconds,embedding_path.
"""

from __future__ import annotations

import csv
import json
import os
import struct

import numpy as np

MAGIC = b"GEOMEVL1"


def write_tensor(path, array: np.ndarray, valid_len: int | None = None):
    a = np.ascontiguousarray(array, dtype="<f4")
    if a.ndim != 2:
        raise ValueError(f"interchange tensors are 2-D, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("refusing to write non-finite values")
    t = int(a.shape[0])
    header = {
        "dtype": "f32",
        "shape": [t, int(a.shape[1])],
        "valid_len": int(t if valid_len is None else valid_len),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(a.tobytes(order="C"))


def write_manifest(path, rows):
    """rows: iterable of (clip_id, label, duration_seconds, embedding_path);
    embedding paths are stored relative to the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["clip_id", "label", "duration_seconds", "embedding_path"])
        for clip_id, label, duration, emb in rows:
            rel = os.path.relpath(os.path.abspath(emb), start=base)
            w.writerow([clip_id, label, repr(float(duration)), rel])


def read_audio_manifest(path):
    """Input CSV for extraction: clip_id,label,audio_path (paths relative to
    the CSV's directory)."""
    base = os.path.dirname(os.path.abspath(path))
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"clip_id", "label", "audio_path"}
        if not required <= set(reader.fieldnames or []):
            raise ValueError(f"{path}: audio manifest needs columns {sorted(required)}")
        for ln, row in enumerate(reader, start=2):
            clip_id = row["clip_id"]
            if "/" in clip_id or "\\" in clip_id or clip_id in ("", ".", ".."):
                raise ValueError(f"{path}:{ln}: clip_id {clip_id!r} is not a safe file stem")
            audio = row["audio_path"]
            if not os.path.isabs(audio):
                audio = os.path.join(base, audio)
            out.append((clip_id, row["label"], audio))
    if not out:
        raise ValueError(f"{path}: audio manifest has no rows")
    return out
