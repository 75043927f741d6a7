"""On-disk interchange format, manifest CSV parsing, and dataset filtering.

Tensor file layout (little-endian throughout):

    bytes 0..7    magic "GEOMEVL1"
    bytes 8..11   uint32 header length H
    bytes 12..12+H-1  JSON header: {"dtype":"f32","shape":[T,D],"valid_len":int}
                      (matrix caches add a "metric" key)
    remainder     T*D float32 values, row-major

Writes then reads round-trip bit-exactly for finite inputs.
"""

from __future__ import annotations

import csv
import json
import os
import struct

import numpy as np

from .data import DatasetManifest, ManifestItem, SequenceEmbedding
from .errors import DegenerateDataError, FormatError, GeomevalError, ParameterError

MAGIC = b"GEOMEVL1"


def write_tensor(path, array: np.ndarray, valid_len: int | None = None, extra_header: dict | None = None):
    """Write a 2-D float array in the interchange format (stored as float32)."""
    a = np.ascontiguousarray(array, dtype="<f4")
    if a.ndim != 2:
        raise ParameterError(f"interchange tensors are 2-D, got shape {a.shape}")
    header = {
        "dtype": "f32",
        "shape": [int(a.shape[0]), int(a.shape[1])],
        "valid_len": int(a.shape[0] if valid_len is None else valid_len),
    }
    if extra_header:
        header.update(extra_header)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(a.tobytes(order="C"))


def read_tensor(path):
    """Read an interchange tensor file.

    Returns ``(array, valid_len, header)`` with ``array`` float32, no
    sanitization applied (see :func:`load_sequence_set` for that).
    """
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise FormatError(f"{path}: truncated header length")
        (hlen,) = struct.unpack("<I", raw_len)
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise FormatError(f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: unparseable header: {exc}") from exc
        if header.get("dtype") != "f32":
            raise FormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
        shape = header.get("shape")
        if (
            not isinstance(shape, list)
            or len(shape) != 2
            or not all(isinstance(s, int) and s >= 0 for s in shape)
        ):
            raise FormatError(f"{path}: bad shape field {shape!r}")
        t, d = shape
        if t == 0:
            raise FormatError(f"{path}: empty sequence (T == 0)")
        payload = fh.read()
    expected = t * d * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(t, d)
    valid_len = header.get("valid_len", t)
    if not isinstance(valid_len, int) or not (1 <= valid_len <= t):
        raise FormatError(f"{path}: bad valid_len {valid_len!r} for T={t}")
    return arr, valid_len, header


def probe_tensor(path) -> dict:
    """Parse a tensor file's header and check the payload size on disk
    without reading it. Returns the header."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise FormatError(f"{path}: truncated header length")
        (hlen,) = struct.unpack("<I", raw_len)
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise FormatError(f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: unparseable header: {exc}") from exc
    shape = header.get("shape")
    if not isinstance(shape, list) or len(shape) != 2:
        raise FormatError(f"{path}: bad shape field {shape!r}")
    expected = 12 + hlen + shape[0] * shape[1] * 4
    actual = os.path.getsize(path)
    if actual != expected:
        raise FormatError(f"{path}: file is {actual} bytes, header implies {expected}")
    return header


def probe_manifest(path, subset_name: str) -> list[str]:
    """Validation pass over a manifest and its tensor files; returns problems."""
    problems = []
    if not os.path.exists(path):
        return [f"subset {subset_name!r}: manifest not found: {path}"]
    try:
        manifest = read_manifest(path, subset_name)
    except (FormatError, OSError) as exc:
        return [f"subset {subset_name!r}: {exc}"]
    seen: set[str] = set()
    for item in manifest.items:
        if item.clip_id in seen:
            problems.append(f"subset {subset_name!r}: duplicate clip_id {item.clip_id!r}")
        seen.add(item.clip_id)
    for item in manifest.items:
        if not item.embedding_path:
            problems.append(f"subset {subset_name!r}: clip {item.clip_id!r} has no embedding path")
            continue
        if not os.path.exists(item.embedding_path):
            problems.append(
                f"subset {subset_name!r}: clip {item.clip_id!r}: missing file {item.embedding_path}"
            )
            continue
        try:
            probe_tensor(item.embedding_path)
        except FormatError as exc:
            problems.append(f"subset {subset_name!r}: clip {item.clip_id!r}: {exc}")
    return problems


def sanitize_frames(arr: np.ndarray):
    """Replace NaN with 0.0 and +/-Inf with the matrix's finite max/min.

    Returns ``(clean_array, n_replaced)``. A matrix with no finite entries
    at all sanitizes to zeros.
    """
    bad = ~np.isfinite(arr)
    n_bad = int(bad.sum())
    if n_bad == 0:
        return arr, 0
    out = np.array(arr, dtype=arr.dtype, copy=True)
    finite = arr[~bad]
    hi = finite.max() if finite.size else 0.0
    lo = finite.min() if finite.size else 0.0
    out[np.isnan(arr)] = 0.0
    out[np.isposinf(arr)] = hi
    out[np.isneginf(arr)] = lo
    return out, n_bad


def load_sequence_set(manifest: DatasetManifest) -> list[SequenceEmbedding]:
    """Load every manifest item as a SequenceEmbedding, in manifest order.

    Non-finite entries are sanitized and counted on each sequence's
    ``sanitized`` field.
    """
    out = []
    for item in manifest.items:
        path = item.embedding_path
        if not os.path.exists(path):
            raise GeomevalError(f"clip {item.clip_id!r}: embedding file not found: {path}")
        try:
            arr, valid_len, _ = read_tensor(path)
        except OSError as exc:
            raise GeomevalError(f"clip {item.clip_id!r}: cannot read {path}: {exc}") from exc
        clean, n_bad = sanitize_frames(arr)
        out.append(
            SequenceEmbedding(
                frames=clean, valid_len=valid_len, clip_id=item.clip_id, sanitized=n_bad
            )
        )
    return out


def read_manifest(path, subset_name: str | None = None) -> DatasetManifest:
    """Read a manifest CSV (clip_id,label,duration_seconds,embedding_path).

    A labels-only CSV (clip_id,label) is also accepted; durations default to
    1.0 and embedding paths to "" in that case. Relative embedding paths are
    resolved against the CSV's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    items = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        full = {"clip_id", "label", "duration_seconds", "embedding_path"}
        labels_only = {"clip_id", "label"}
        if set(cols) >= full:
            mode = "full"
        elif set(cols) >= labels_only:
            mode = "labels"
        else:
            raise FormatError(f"{path}: unrecognized manifest columns {cols}")
        for ln, row in enumerate(reader, start=2):
            if mode == "full":
                try:
                    dur = float(row["duration_seconds"])
                except ValueError as exc:
                    raise FormatError(f"{path}:{ln}: bad duration {row['duration_seconds']!r}") from exc
                if dur <= 0:
                    raise FormatError(f"{path}:{ln}: duration must be > 0, got {dur}")
                emb = row["embedding_path"]
                if emb and not os.path.isabs(emb):
                    emb = os.path.join(base, emb)
            else:
                dur, emb = 1.0, ""
            items.append(ManifestItem(row["clip_id"], row["label"], dur, emb))
    if not items:
        raise FormatError(f"{path}: manifest has no rows")
    name = subset_name if subset_name is not None else os.path.splitext(os.path.basename(path))[0]
    return DatasetManifest(items=tuple(items), subset_name=name)


def write_manifest(path, manifest: DatasetManifest):
    """Write a manifest CSV; embedding paths are stored relative to the CSV's
    directory (the form read_manifest resolves), keeping datasets relocatable."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["clip_id", "label", "duration_seconds", "embedding_path"])
        for it in manifest.items:
            emb = it.embedding_path
            if emb:
                emb = os.path.relpath(os.path.abspath(emb), start=base)
            w.writerow([it.clip_id, it.label, repr(it.duration_seconds), emb])


def filter_dataset(
    manifest: DatasetManifest, min_class_size: int, duration_percentile: float
) -> DatasetManifest:
    """Drop duration outliers, then undersized classes.

    Items strictly longer than the given linear-interpolation percentile of
    this manifest's durations go first; classes whose remaining size falls
    below ``min_class_size`` are then removed entirely. Relative order is
    preserved.
    """
    if len(manifest) == 0:
        raise DegenerateDataError("empty manifest")
    if min_class_size < 1:
        raise ParameterError(f"min_class_size must be >= 1, got {min_class_size}")
    if not (0.0 < duration_percentile <= 100.0):
        raise ParameterError(f"duration_percentile must be in (0, 100], got {duration_percentile}")

    cutoff = float(np.percentile(manifest.durations(), duration_percentile))
    kept = [it for it in manifest.items if it.duration_seconds <= cutoff]

    sizes: dict[str, int] = {}
    for it in kept:
        sizes[it.label] = sizes.get(it.label, 0) + 1
    kept = [it for it in kept if sizes[it.label] >= min_class_size]

    if not kept:
        raise DegenerateDataError(
            f"subset {manifest.subset_name!r}: no items survive filtering "
            f"(min_class_size={min_class_size}, duration_percentile={duration_percentile})"
        )
    return DatasetManifest(items=tuple(kept), subset_name=manifest.subset_name)
