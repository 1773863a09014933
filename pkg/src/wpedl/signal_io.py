"""Loading, windowing, normalizing, and splitting labeled sensor recordings.

A corpus is described by a JSON manifest pointing at plain CSV signal files
(one sample per row, one column per channel, optional single header row).
Recordings are cut into fixed-length windows, normalized per window, and
partitioned with a deterministic stratified split.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    EmptyInputError,
    ManifestError,
    MissingFileError,
    NonFiniteSampleError,
    TooShortError,
)

_MANIFEST_KEYS = {"dataset_tag", "sample_rate_hz", "label_set", "entries"}
_ENTRY_KEYS = {"path", "channel", "label"}

NORMALIZE_MODES = ("zscore", "minmax", "none")


@dataclass(frozen=True)
class ManifestEntry:
    """One labeled recording: a CSV file plus the channel to read from it."""

    path: str
    channel: str | int
    label: str


@dataclass(frozen=True)
class RecordingManifest:
    dataset_tag: str
    sample_rate_hz: float
    label_set: tuple[str, ...]
    entries: tuple[ManifestEntry, ...]

    @property
    def class_count(self) -> int:
        return len(self.label_set)


@dataclass(frozen=True)
class TimeSeriesSegment:
    """A fixed-length window of sensor samples.

    source_ref is (manifest entry index, start offset in samples); synthetic
    segments use entry index -1.
    """

    samples: np.ndarray
    sample_rate_hz: float
    label: str
    source_ref: tuple[int, int] = (-1, 0)

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.ascontiguousarray(self.samples, dtype=np.float64)
        )
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptyInputError("segment samples must be a nonempty 1-D vector")

    def __len__(self) -> int:
        return self.samples.size


def load_manifest(path: str | Path) -> RecordingManifest:
    """Load and validate a manifest JSON file.

    Relative entry paths are checked against the manifest's directory but
    stored verbatim so that write_manifest round-trips exactly.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("manifest document must be a JSON object")

    unknown = set(doc) - _MANIFEST_KEYS
    if unknown:
        raise ManifestError(f"unknown manifest field(s): {sorted(unknown)}")
    for key in ("dataset_tag", "sample_rate_hz", "entries"):
        if key not in doc:
            raise ManifestError(f"manifest missing required field '{key}'")

    sample_rate = float(doc["sample_rate_hz"])
    if sample_rate <= 0:
        raise ManifestError("sample_rate_hz must be positive")

    entries = []
    seen: set[tuple[str, str]] = set()
    for i, raw in enumerate(doc["entries"]):
        if not isinstance(raw, dict):
            raise ManifestError(f"entry {i} is not an object")
        unknown = set(raw) - _ENTRY_KEYS
        if unknown:
            raise ManifestError(f"entry {i} has unknown field(s): {sorted(unknown)}")
        if "path" not in raw or "label" not in raw:
            raise ManifestError(f"entry {i} missing 'path' or 'label'")
        channel = raw.get("channel", 0)
        if not isinstance(channel, (str, int)):
            raise ManifestError(f"entry {i}: channel must be a column index or name")
        key = (raw["path"], str(channel))
        if key in seen:
            raise ManifestError(f"duplicate (file, channel) pair: {key}")
        seen.add(key)
        entry = ManifestEntry(path=raw["path"], channel=channel, label=str(raw["label"]))
        entry_path = Path(entry.path)
        if not entry_path.is_absolute():
            entry_path = path.parent / entry_path
        if not entry_path.exists():
            raise MissingFileError(f"entry {i}: signal file not found: {entry_path}")
        entries.append(entry)

    if not entries:
        raise ManifestError("manifest has no entries")

    label_set = tuple(sorted({e.label for e in entries}))
    if "label_set" in doc:
        declared = set(map(str, doc["label_set"]))
        extra = set(label_set) - declared
        if extra:
            raise ManifestError(
                f"entry label(s) {sorted(extra)} not in declared label_set"
            )

    return RecordingManifest(
        dataset_tag=str(doc["dataset_tag"]),
        sample_rate_hz=sample_rate,
        label_set=label_set,
        entries=tuple(entries),
    )


def write_manifest(manifest: RecordingManifest, path: str | Path) -> Path:
    """Write a manifest as JSON; inverse of load_manifest."""
    path = Path(path)
    doc = {
        "dataset_tag": manifest.dataset_tag,
        "sample_rate_hz": manifest.sample_rate_hz,
        "label_set": list(manifest.label_set),
        "entries": [
            {"path": e.path, "channel": e.channel, "label": e.label}
            for e in manifest.entries
        ],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_signal_csv(path: str | Path, channel: str | int = 0) -> np.ndarray:
    """Read one channel of a CSV signal file as a float vector.

    Accepts single- or multi-column files with an optional single header
    row; `channel` selects a column by index or header name.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"signal file not found: {path}")
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"signal file is empty: {path}")

    header: list[str] | None = None
    try:
        [float(cell) for cell in rows[0]]
    except ValueError:
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"signal file has a header but no samples: {path}")

    if isinstance(channel, str):
        if header is None or channel not in header:
            raise DataError(f"channel '{channel}' not found in {path}")
        col = header.index(channel)
    else:
        col = int(channel)
        if col < 0 or col >= len(rows[0]):
            raise DataError(f"channel index {col} out of range for {path}")

    try:
        values = np.array([float(row[col]) for row in rows], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise DataError(f"non-numeric or ragged data in {path}: {exc}") from exc
    return values


def read_entry(manifest_path: str | Path, entry: ManifestEntry) -> np.ndarray:
    """Read the signal an entry points at, resolving relative paths."""
    entry_path = Path(entry.path)
    if not entry_path.is_absolute():
        entry_path = Path(manifest_path).parent / entry_path
    return read_signal_csv(entry_path, entry.channel)


def segment(
    recording: np.ndarray,
    sample_rate_hz: float,
    length: int,
    hop: int,
    *,
    label: str,
    entry_index: int = -1,
) -> list[TimeSeriesSegment]:
    """Cut a recording into floor((N-length)/hop)+1 windows of `length` samples.

    Window m starts at offset m*hop; a trailing remainder shorter than one
    window is discarded.
    """
    recording = np.asarray(recording, dtype=np.float64)
    if length < 2:
        raise ValueError(f"window length must be >= 2, got {length}")
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    n = recording.size
    if n < length:
        raise TooShortError(
            f"recording has {n} samples, shorter than one {length}-sample window"
        )
    count = (n - length) // hop + 1
    return [
        TimeSeriesSegment(
            samples=recording[m * hop : m * hop + length],
            sample_rate_hz=sample_rate_hz,
            label=label,
            source_ref=(entry_index, m * hop),
        )
        for m in range(count)
    ]


def normalize(seg: TimeSeriesSegment, mode: str = "zscore") -> TimeSeriesSegment:
    """Normalize a segment's samples.

    zscore: zero mean, unit population std (all zeros if std is 0).
    minmax: affine map onto [0, 1] (all zeros if constant).
    none:   identity.
    """
    if mode not in NORMALIZE_MODES:
        raise ValueError(f"unknown normalize mode '{mode}'")
    x = seg.samples
    if not np.all(np.isfinite(x)):
        raise NonFiniteSampleError(
            f"segment from entry {seg.source_ref[0]} at offset {seg.source_ref[1]} "
            "contains non-finite samples"
        )
    if mode == "none":
        return seg
    if mode == "zscore":
        std = x.std()
        out = np.zeros_like(x) if std == 0.0 else (x - x.mean()) / std
    else:
        span = x.max() - x.min()
        out = np.zeros_like(x) if span == 0.0 else (x - x.min()) / span
    return replace(seg, samples=out)


def stratified_split(
    segments: list[TimeSeriesSegment],
    fractions: tuple[float, float],
    seed: int,
) -> tuple[list[TimeSeriesSegment], list[TimeSeriesSegment]]:
    """Deterministically split segments per class in the given proportions.

    Per-class counts are rounded to the nearest integer (clamped so that
    both sides keep at least one segment per class), which keeps every
    class's split within one segment of the requested fractions.
    """
    f_train, f_test = fractions
    if f_train <= 0 or f_test <= 0:
        raise ValueError("split fractions must be positive")
    if abs(f_train + f_test - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {f_train + f_test}")
    if not segments:
        raise EmptyInputError("no segments to split")

    by_class: dict[str, list[int]] = {}
    for i, seg in enumerate(segments):
        by_class.setdefault(seg.label, []).append(i)
    for label, idxs in by_class.items():
        if len(idxs) < 2:
            raise DataError(f"class '{label}' has fewer than 2 segments")

    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in sorted(by_class):
        idxs = np.array(by_class[label])
        rng.shuffle(idxs)
        n_c = idxs.size
        n_train = int(round(f_train * n_c))
        n_train = min(max(n_train, 1), n_c - 1)
        train_idx.extend(idxs[:n_train].tolist())
        test_idx.extend(idxs[n_train:].tolist())

    train_idx.sort()
    test_idx.sort()
    return [segments[i] for i in train_idx], [segments[i] for i in test_idx]
