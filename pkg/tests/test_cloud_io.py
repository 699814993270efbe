import numpy as np
import pytest

from dynseg.cloud_io import (
    InteractionRecord,
    LabeledFrame,
    ParseError,
    PointCloudFrame,
    SequenceManifest,
    load_frame,
    load_ground_truth,
    load_sequence,
    read_interaction_log,
    read_label_file,
    read_labels_dir,
    write_frame,
    write_ground_truth,
    write_interaction_log,
    write_labels,
    write_manifest,
)


def _frame(n=4, frame_index=0):
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(n, 3))
    cols = rng.integers(0, 256, size=(n, 3), dtype=np.uint8)
    return PointCloudFrame(frame_index=frame_index, points=pts, colors=cols)


def test_frame_roundtrip(tmp_path):
    frame = _frame(17)
    path = tmp_path / "f.txt"
    write_frame(frame, path)
    back = load_frame(path, frame_index=frame.frame_index)
    np.testing.assert_allclose(back.points, frame.points, rtol=1e-6, atol=1e-9)
    np.testing.assert_array_equal(back.colors, frame.colors)
    assert back.frame_index == frame.frame_index


def test_frame_header(tmp_path):
    path = tmp_path / "f.txt"
    write_frame(_frame(3), path)
    first = path.read_text().splitlines()[0]
    assert first == "ptseq v1 3"


def test_empty_frame_roundtrip(tmp_path):
    frame = PointCloudFrame(0, np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8))
    path = tmp_path / "empty.txt"
    write_frame(frame, path)
    assert load_frame(path).num_points == 0


def test_load_frame_bad_magic(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nope v1 1\n0 0 0 1 2 3\n")
    with pytest.raises(ParseError) as err:
        load_frame(path)
    assert ":1:" in str(err.value)


def test_load_frame_count_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("ptseq v1 2\n0 0 0 1 2 3\n")
    with pytest.raises(ParseError):
        load_frame(path)


def test_load_frame_bad_field_count(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("ptseq v1 1\n0 0 0 1 2\n")
    with pytest.raises(ParseError) as err:
        load_frame(path)
    assert ":2:" in str(err.value)


def test_load_frame_clamps_colors(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("ptseq v1 1\n0 0 0 300 -5 90\n")
    with pytest.warns(UserWarning):
        frame = load_frame(path)
    np.testing.assert_array_equal(frame.colors[0], [255, 0, 90])


def test_labels_roundtrip(tmp_path):
    labels = np.array([4, 4, 0, 2, 0])
    path = tmp_path / "gt.txt"
    write_ground_truth(labels, path)
    np.testing.assert_array_equal(load_ground_truth(path), labels)


def test_label_file_roundtrip(tmp_path):
    frame = LabeledFrame(frame_index=3, labels=np.array([1, 1, 0]))
    path = tmp_path / "labels_0003.txt"
    write_labels(frame, path)
    data = read_label_file(path)
    assert data == {3: {0: 1, 1: 1, 2: 0}}


def test_write_labels_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_labels(LabeledFrame(0, np.zeros(0, dtype=np.int64)), tmp_path / "x.txt")


def test_read_labels_dir(tmp_path):
    write_labels(LabeledFrame(0, np.array([0, 0, 1])), tmp_path / "labels_0000.txt")
    write_labels(LabeledFrame(1, np.array([1, 1, 1])), tmp_path / "labels_0001.txt")
    merged = read_labels_dir(tmp_path)
    assert sorted(merged) == [0, 1]
    np.testing.assert_array_equal(merged[0], [0, 0, 1])
    np.testing.assert_array_equal(merged[1], [1, 1, 1])


def test_read_labels_dir_rejects_gaps(tmp_path):
    write_labels(LabeledFrame(0, np.array([0, 0])), tmp_path / "labels_0000.txt")
    path = tmp_path / "labels_0000.txt"
    text = path.read_text().replace("0 1 0", "0 2 0")
    path.write_text(text)
    with pytest.raises(ParseError):
        read_labels_dir(tmp_path)


def test_manifest_roundtrip(tmp_path):
    f0 = tmp_path / "frames" / "f0.txt"
    f0.parent.mkdir()
    write_frame(_frame(2), f0)
    f1 = tmp_path / "frames" / "f1.txt"
    write_frame(_frame(2, frame_index=1), f1)
    g0 = tmp_path / "frames" / "g0.txt"
    g1 = tmp_path / "frames" / "g1.txt"
    write_ground_truth(np.array([0, 0]), g0)
    write_ground_truth(np.array([0, 1]), g1)
    manifest = SequenceManifest(name="demo", frame_paths=[str(f0), str(f1)], gt_paths=[str(g0), str(g1)])
    mpath = tmp_path / "manifest.txt"
    write_manifest(manifest, mpath)
    back = load_sequence(mpath)
    assert back.name == "demo"
    assert len(back.frame_paths) == 2
    assert back.frame_paths[0].endswith("f0.txt")
    assert len(back.gt_paths) == 2
    assert load_frame(back.frame_paths[1]).num_points == 2


def test_load_sequence_missing_frame(tmp_path):
    mpath = tmp_path / "manifest.txt"
    mpath.write_text("name demo\nframe missing.txt\n")
    with pytest.raises(ParseError):
        load_sequence(mpath)


def test_load_sequence_gt_count_mismatch(tmp_path):
    f0 = tmp_path / "f0.txt"
    write_frame(_frame(3), f0)
    g0 = tmp_path / "g0.txt"
    write_ground_truth(np.array([0, 1]), g0)
    mpath = tmp_path / "manifest.txt"
    mpath.write_text(f"name demo\nframe {f0.name}\ngt {g0.name}\n")
    with pytest.raises(ParseError):
        load_sequence(mpath)


def test_interaction_log_roundtrip(tmp_path):
    events = [
        InteractionRecord(start_frame=7, end_frame=9, blob_hint=2, object_ids=(1, 4)),
        InteractionRecord(start_frame=2, end_frame=2, blob_hint=0, object_ids=(0, 3, 5)),
    ]
    path = tmp_path / "log.txt"
    write_interaction_log(events, path)
    back = read_interaction_log(path)
    # log is sorted by (start, end, ids)
    assert back[0].start_frame == 2
    assert back[0].object_ids == (0, 3, 5)
    assert back[1] == events[0]


def test_interaction_log_empty(tmp_path):
    path = tmp_path / "log.txt"
    write_interaction_log([], path)
    assert read_interaction_log(path) == []


def test_written_files_have_no_trailing_whitespace(tmp_path):
    write_frame(_frame(3), tmp_path / "f.txt")
    write_ground_truth(np.array([0, 1, 2]), tmp_path / "g.txt")
    for name in ("f.txt", "g.txt"):
        for line in (tmp_path / name).read_text().splitlines():
            assert line == line.rstrip()
