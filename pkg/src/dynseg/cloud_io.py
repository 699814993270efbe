"""Text formats for point-cloud frames, label files, manifests, and interaction logs.

All writers emit "\n" newlines, single-space separators, and no trailing
whitespace so that repeated runs produce byte-identical files.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

FRAME_MAGIC = "ptseq"
LABEL_MAGIC = "ptlab"
FORMAT_VERSION = "v1"


class ParseError(Exception):
    """Malformed input file; message carries path and line number."""


def _fail(path: str | os.PathLike, line_no: int, msg: str) -> None:
    raise ParseError(f"{path}:{line_no}: {msg}")


@dataclass
class PointCloudFrame:
    """One foreground cloud: positions in meters, colors as 8-bit RGB."""

    frame_index: int
    points: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) uint8

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if len(self.points) != len(self.colors):
            raise ValueError("points and colors must have equal length")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("coordinates must be finite")

    @property
    def num_points(self) -> int:
        return len(self.points)


@dataclass
class LabeledFrame:
    """Per-point object ids for one frame."""

    frame_index: int
    labels: np.ndarray  # (N,) int64

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)


@dataclass
class SequenceManifest:
    name: str
    frame_paths: list[str]
    gt_paths: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class InteractionRecord:
    """Wire-format interaction event: closed frame interval plus object ids."""

    start_frame: int
    end_frame: int
    blob_hint: int
    object_ids: tuple[int, ...]


def load_frame(path: str | os.PathLike, frame_index: int = 0) -> PointCloudFrame:
    """Read one "ptseq v1" frame file. "#" lines are ignored anywhere."""
    header = None
    pts: list[tuple[float, float, float]] = []
    cols: list[tuple[int, int, int]] = []
    expected = 0
    clamped = False
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 3 or parts[0] != FRAME_MAGIC or parts[1] != FORMAT_VERSION:
                    _fail(path, line_no, f"bad header {line!r}, expected '{FRAME_MAGIC} {FORMAT_VERSION} <N>'")
                try:
                    expected = int(parts[2])
                except ValueError:
                    _fail(path, line_no, f"non-numeric point count {parts[2]!r}")
                if expected < 0:
                    _fail(path, line_no, "negative point count")
                header = parts
                continue
            fields = line.split()
            if len(fields) != 6:
                _fail(path, line_no, f"expected 6 fields, got {len(fields)}")
            if len(pts) >= expected:
                _fail(path, line_no, f"more than the declared {expected} points")
            try:
                x, y, z = float(fields[0]), float(fields[1]), float(fields[2])
                r, g, b = int(fields[3]), int(fields[4]), int(fields[5])
            except ValueError:
                _fail(path, line_no, f"non-numeric field in {line!r}")
            if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
                _fail(path, line_no, "non-finite coordinate")
            if not (0 <= r <= 255 and 0 <= g <= 255 and 0 <= b <= 255):
                clamped = True
                r, g, b = (min(max(c, 0), 255) for c in (r, g, b))
            pts.append((x, y, z))
            cols.append((r, g, b))
    if header is None:
        raise ParseError(f"{path}: missing '{FRAME_MAGIC} {FORMAT_VERSION}' header")
    if len(pts) != expected:
        raise ParseError(f"{path}: end of file: header declared {expected} points, found {len(pts)}")
    if clamped:
        warnings.warn(f"{path}: color values outside [0, 255] were clamped", stacklevel=2)
    points = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    colors = np.asarray(cols, dtype=np.uint8).reshape(-1, 3)
    return PointCloudFrame(frame_index=frame_index, points=points, colors=colors)


def write_frame(frame: PointCloudFrame, path: str | os.PathLike) -> None:
    """Write a frame with 9-significant-digit coordinates (round-trip safe)."""
    lines = [f"{FRAME_MAGIC} {FORMAT_VERSION} {frame.num_points}"]
    for (x, y, z), (r, g, b) in zip(frame.points, frame.colors):
        lines.append(f"{x:.9g} {y:.9g} {z:.9g} {int(r)} {int(g)} {int(b)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_ground_truth(path: str | os.PathLike) -> np.ndarray:
    """Read a "ptlab v1" file of per-point integer labels."""
    header = None
    labels: list[int] = []
    expected = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 3 or parts[0] != LABEL_MAGIC or parts[1] != FORMAT_VERSION:
                    _fail(path, line_no, f"bad header {line!r}, expected '{LABEL_MAGIC} {FORMAT_VERSION} <N>'")
                try:
                    expected = int(parts[2])
                except ValueError:
                    _fail(path, line_no, f"non-numeric label count {parts[2]!r}")
                header = parts
                continue
            try:
                labels.append(int(line))
            except ValueError:
                _fail(path, line_no, f"non-integer label {line!r}")
            if len(labels) > expected:
                _fail(path, line_no, f"more than the declared {expected} labels")
    if header is None:
        raise ParseError(f"{path}: missing '{LABEL_MAGIC} {FORMAT_VERSION}' header")
    if len(labels) != expected:
        raise ParseError(f"{path}: end of file: header declared {expected} labels, found {len(labels)}")
    return np.asarray(labels, dtype=np.int64)


def write_ground_truth(labels: np.ndarray, path: str | os.PathLike) -> None:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    lines = [f"{LABEL_MAGIC} {FORMAT_VERSION} {len(labels)}"]
    lines.extend(str(int(v)) for v in labels)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _peek_count(path: str, magic: str) -> int:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] != magic or parts[1] != FORMAT_VERSION:
                _fail(path, line_no, f"bad header {line!r}")
            try:
                return int(parts[2])
            except ValueError:
                _fail(path, line_no, f"non-numeric count {parts[2]!r}")
    raise ParseError(f"{path}: missing header")


def load_sequence(path: str | os.PathLike) -> SequenceManifest:
    """Read a manifest: ordered "frame <path>" lines, optional "gt <path>" and "name <string>"."""
    base = os.path.dirname(os.path.abspath(path))
    name = os.path.splitext(os.path.basename(path))[0]
    frames: list[str] = []
    gts: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(maxsplit=1)
            if len(parts) != 2:
                _fail(path, line_no, f"malformed manifest line {line!r}")
            key, value = parts
            if key == "frame":
                frames.append(os.path.join(base, value))
            elif key == "gt":
                gts.append(os.path.join(base, value))
            elif key == "name":
                name = value
            else:
                _fail(path, line_no, f"unknown manifest keyword {key!r}")
    if not frames:
        raise ParseError(f"{path}: manifest lists no frames")
    for fp in frames + gts:
        if not os.path.isfile(fp):
            raise ParseError(f"{path}: referenced file does not exist: {fp}")
    if gts and len(gts) != len(frames):
        raise ParseError(f"{path}: ground truth length mismatch: {len(frames)} frames, {len(gts)} gt files")
    # header-level point-count agreement between frames and ground truth
    for i, (fp, gp) in enumerate(zip(frames, gts)):
        nf = _peek_count(fp, FRAME_MAGIC)
        ng = _peek_count(gp, LABEL_MAGIC)
        if nf != ng:
            raise ParseError(f"{path}: frame {i}: {nf} points but {ng} ground-truth labels")
    return SequenceManifest(name=name, frame_paths=frames, gt_paths=gts)


def write_manifest(manifest: SequenceManifest, path: str | os.PathLike) -> None:
    """Paths are written relative to the manifest directory."""
    base = os.path.dirname(os.path.abspath(path))
    lines = [f"name {manifest.name}"]
    lines.extend(f"frame {os.path.relpath(p, base)}" for p in manifest.frame_paths)
    lines.extend(f"gt {os.path.relpath(p, base)}" for p in manifest.gt_paths)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_labels(frame: LabeledFrame, path: str | os.PathLike) -> None:
    """Write "frame_index point_index object_id" lines for one frame."""
    if len(frame.labels) == 0:
        raise ValueError("refusing to write an empty label set")
    if np.any(frame.labels < 0):
        raise ValueError("negative object id in labels")
    lines = [f"{frame.frame_index} {i} {int(v)}" for i, v in enumerate(frame.labels)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_label_file(path: str | os.PathLike) -> dict[int, dict[int, int]]:
    """Read label lines back into {frame_index: {point_index: object_id}}."""
    out: dict[int, dict[int, int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                _fail(path, line_no, f"expected 3 fields, got {len(parts)}")
            try:
                f, p, o = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                _fail(path, line_no, f"non-integer field in {line!r}")
            out.setdefault(f, {})[p] = o
    return out


def read_labels_dir(labels_dir: str | os.PathLike) -> dict[int, np.ndarray]:
    """Collect all label files in a directory into dense per-frame arrays."""
    merged: dict[int, dict[int, int]] = {}
    names = sorted(n for n in os.listdir(labels_dir) if n.startswith("labels") and n.endswith(".txt"))
    if not names:
        raise ParseError(f"{labels_dir}: no label files found")
    for n in names:
        for f, rows in read_label_file(os.path.join(labels_dir, n)).items():
            merged.setdefault(f, {}).update(rows)
    dense: dict[int, np.ndarray] = {}
    for f, rows in sorted(merged.items()):
        n = len(rows)
        if sorted(rows) != list(range(n)):
            raise ParseError(f"{labels_dir}: frame {f}: point indices not contiguous from 0")
        dense[f] = np.asarray([rows[i] for i in range(n)], dtype=np.int64)
    return dense


def write_interaction_log(events, path: str | os.PathLike) -> None:
    """One event per line: start end blob_hint and the sorted object ids."""
    records = []
    for ev in events:
        ids = tuple(sorted(int(i) for i in ev.object_ids))
        hint = getattr(ev, "blob_hint", None)
        if hint is None:
            trace = getattr(ev, "blob_trace", None)
            hint = int(trace[0]) if trace else -1
        records.append((int(ev.start_frame), int(ev.end_frame), int(hint), ids))
    records.sort(key=lambda r: (r[0], r[1], r[3]))
    # leading comment makes the file self-identifying; readers skip "#" lines
    lines = ["# interactions v1"]
    lines.extend(f"{s} {e} {h} " + " ".join(str(i) for i in ids) for s, e, h, ids in records)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_interaction_log(path: str | os.PathLike) -> list[InteractionRecord]:
    out: list[InteractionRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 5:
                _fail(path, line_no, "expected 'start end blob_hint id id [...]'")
            try:
                vals = [int(p) for p in parts]
            except ValueError:
                _fail(path, line_no, f"non-integer field in {line!r}")
            out.append(
                InteractionRecord(
                    start_frame=vals[0],
                    end_frame=vals[1],
                    blob_hint=vals[2],
                    object_ids=tuple(sorted(vals[3:])),
                )
            )
    return out


def dump_supervoxels(supervoxels, path: str | os.PathLike) -> None:
    """Debug dump: "sv v1 <K>" then one line per supervoxel."""
    lines = [f"sv {FORMAT_VERSION} {len(supervoxels)}"]
    for sv in supervoxels:
        c = sv.centroid
        lines.append(f"{sv.sv_id} {len(sv.point_indices)} {c[0]:.9g} {c[1]:.9g} {c[2]:.9g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
