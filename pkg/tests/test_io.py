import numpy as np
import pytest

from geomeval.data import DatasetManifest, ManifestItem
from geomeval.errors import DegenerateDataError, FormatError, GeomevalError
from geomeval.io import (
    filter_dataset,
    load_sequence_set,
    probe_manifest,
    read_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)


def _manifest(tmp_path, arrays, labels=None, durations=None):
    items = []
    for i, arr in enumerate(arrays):
        path = tmp_path / f"clip{i}.gevl"
        write_tensor(path, arr)
        items.append(
            ManifestItem(
                clip_id=f"clip{i}",
                label=(labels[i] if labels else "x"),
                duration_seconds=(durations[i] if durations else 1.0),
                embedding_path=str(path),
            )
        )
    return DatasetManifest(items=tuple(items), subset_name="t")


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((7, 5)).astype(np.float32)
    path = tmp_path / "t.gevl"
    write_tensor(path, arr, valid_len=4)
    back, valid_len, header = read_tensor(path)
    assert valid_len == 4
    assert header["shape"] == [7, 5]
    assert back.dtype == np.float32
    assert np.array_equal(back, arr)
    assert back.tobytes() == arr.tobytes()


def test_load_preserves_manifest_order(tmp_path):
    arrays = [np.full((3, 2), i, dtype=np.float32) for i in range(3)]
    seqs = load_sequence_set(_manifest(tmp_path, arrays))
    assert [s.clip_id for s in seqs] == ["clip0", "clip1", "clip2"]
    for i, s in enumerate(seqs):
        assert np.array_equal(s.frames, arrays[i])
        assert s.sanitized == 0


def test_nan_is_sanitized_and_counted(tmp_path):
    arr = np.array([[1.0, np.nan], [3.0, 4.0]], dtype=np.float32)
    seqs = load_sequence_set(_manifest(tmp_path, [arr]))
    assert seqs[0].sanitized == 1
    assert seqs[0].frames[0, 1] == 0.0


def test_inf_replaced_by_finite_extremes(tmp_path):
    arr = np.array([[1.0, np.inf], [-np.inf, 4.0]], dtype=np.float32)
    seqs = load_sequence_set(_manifest(tmp_path, [arr]))
    assert seqs[0].frames[0, 1] == 4.0
    assert seqs[0].frames[1, 0] == 1.0
    assert seqs[0].sanitized == 2


def test_missing_file_names_clip(tmp_path):
    man = DatasetManifest(
        items=(ManifestItem("ghost", "x", 1.0, str(tmp_path / "absent.gevl")),),
        subset_name="t",
    )
    with pytest.raises(GeomevalError, match="ghost"):
        load_sequence_set(man)


def test_bad_magic_is_format_error(tmp_path):
    path = tmp_path / "bad.gevl"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(FormatError):
        read_tensor(path)


def test_truncated_payload_is_format_error(tmp_path):
    path = tmp_path / "t.gevl"
    write_tensor(path, np.ones((4, 4), dtype=np.float32))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError, match="payload"):
        read_tensor(path)


def test_manifest_csv_round_trip(tmp_path):
    man = _manifest(tmp_path, [np.ones((2, 2), dtype=np.float32)], labels=["a"], durations=[2.5])
    csv_path = tmp_path / "manifest.csv"
    write_manifest(csv_path, man)
    back = read_manifest(csv_path, "t")
    assert back.items[0].clip_id == "clip0"
    assert back.items[0].duration_seconds == 2.5
    assert probe_manifest(csv_path, "t") == []


def test_manifest_relative_paths_resolve_against_csv(tmp_path, monkeypatch):
    # writer stores paths relative to the CSV, so the dataset directory
    # can move and the working directory does not matter
    data = tmp_path / "data"
    data.mkdir()
    write_tensor(data / "c.gevl", np.ones((2, 2), dtype=np.float32))
    monkeypatch.chdir(tmp_path)
    man = DatasetManifest(
        items=(ManifestItem("c", "A", 1.0, "data/c.gevl"),), subset_name="t"
    )
    write_manifest(data / "manifest.csv", man)
    back = read_manifest(data / "manifest.csv", "t")
    assert probe_manifest(data / "manifest.csv", "t") == []
    seqs = load_sequence_set(back)
    assert seqs[0].clip_id == "c"


def test_labels_only_csv(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("clip_id,label\nc1,A\nc2,B\n")
    man = read_manifest(path)
    assert [it.label for it in man.items] == ["A", "B"]


def test_filter_keeps_single_full_class():
    items = tuple(ManifestItem(f"c{i}", "A", 1.0, "") for i in range(10))
    man = DatasetManifest(items=items, subset_name="t")
    out = filter_dataset(man, min_class_size=6, duration_percentile=100.0)
    assert len(out) == 10


def test_filter_drops_undersized_class():
    items = tuple(ManifestItem(f"a{i}", "A", 1.0, "") for i in range(7)) + tuple(
        ManifestItem(f"b{i}", "B", 1.0, "") for i in range(5)
    )
    man = DatasetManifest(items=items, subset_name="t")
    out = filter_dataset(man, min_class_size=6, duration_percentile=100.0)
    assert len(out) == 7
    assert all(it.label == "A" for it in out.items)


def test_duration_percentile_removes_top_two_of_hundred():
    # durations 1..100, 98th percentile by linear interpolation = 98.02:
    # exactly the two longest clips sit strictly above it
    items = tuple(ManifestItem(f"c{i}", "A", float(i + 1), "") for i in range(100))
    man = DatasetManifest(items=items, subset_name="t")
    out = filter_dataset(man, min_class_size=1, duration_percentile=98.0)
    assert len(out) == 98
    assert max(it.duration_seconds for it in out.items) == 98.0


def test_duration_filter_runs_before_class_filter():
    # class B's long clip is removed first, leaving B under-sized
    items = tuple(ManifestItem(f"a{i}", "A", 1.0, "") for i in range(4)) + tuple(
        ManifestItem(f"b{i}", "B", d, "") for i, d in enumerate([1.0, 50.0])
    )
    man = DatasetManifest(items=items, subset_name="t")
    out = filter_dataset(man, min_class_size=2, duration_percentile=90.0)
    assert {it.label for it in out.items} == {"A"}


def test_filter_empty_result_raises():
    items = (ManifestItem("c0", "A", 1.0, ""),)
    man = DatasetManifest(items=items, subset_name="t")
    with pytest.raises(DegenerateDataError):
        filter_dataset(man, min_class_size=2, duration_percentile=100.0)


def test_class_filter_is_idempotent_at_full_percentile():
    items = tuple(ManifestItem(f"a{i}", "A", 1.0, "") for i in range(6)) + tuple(
        ManifestItem(f"b{i}", "B", 1.0, "") for i in range(3)
    )
    man = DatasetManifest(items=items, subset_name="t")
    once = filter_dataset(man, min_class_size=4, duration_percentile=100.0)
    twice = filter_dataset(once, min_class_size=4, duration_percentile=100.0)
    assert once == twice
    sizes = {}
    for it in twice.items:
        sizes[it.label] = sizes.get(it.label, 0) + 1
    assert all(v >= 4 for v in sizes.values())
