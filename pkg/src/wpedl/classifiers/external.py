"""Import backend wrapping externally produced probability files.

Lets predictions from models trained elsewhere join the ensemble: a CSV
with columns ``sample_id,p_<label1>,...,p_<labelC>`` is validated once and
then replayed by sample id.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import (
    DataError,
    DuplicateSampleError,
    LabelMismatchError,
    MissingFileError,
    RowSumViolationError,
    UnknownSampleError,
)
from .base import ClassifierBackend, SpectrogramDataset

ROW_SUM_TOL = 1e-6


class ExternalProbabilityBackend(ClassifierBackend):
    """Frozen backend replaying stored probability vectors by sample id."""

    def __init__(self, identity: str, classes: tuple[str, ...], table: dict[str, np.ndarray]):
        self.identity = identity
        self.classes = tuple(classes)
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}

    @property
    def sample_ids(self) -> list[str]:
        return list(self.table)

    def predict_proba(self, sample_id: str) -> np.ndarray:
        if sample_id not in self.table:
            raise UnknownSampleError(
                f"backend '{self.identity}' has no prediction for sample '{sample_id}'"
            )
        return self.table[sample_id]

    def predict_proba_ids(self, sample_ids: list[str]) -> np.ndarray:
        return np.stack([self.predict_proba(sid) for sid in sample_ids])

    def predict_proba_dataset(self, dataset: SpectrogramDataset) -> np.ndarray:
        self._check_dataset(dataset)
        return self.predict_proba_ids(dataset.sample_ids)

    def save_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id"] + [f"p_{c}" for c in self.classes])
            for sid, probs in self.table.items():
                writer.writerow([sid] + [repr(float(p)) for p in probs])
        return path


def import_external(
    path: str | Path,
    expected_labels: tuple[str, ...],
    identity: str | None = None,
) -> ExternalProbabilityBackend:
    """Load and validate a probability CSV.

    Rows must sum to 1 within 1e-6; accepted rows are renormalized onto the
    exact simplex so downstream consumers can hold the tighter
    probability-vector tolerance.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"probability file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"probability file is empty: {path}") from None
        rows = [row for row in reader if row]

    header = [cell.strip() for cell in header]
    if not header or header[0] != "sample_id":
        raise DataError(f"first column must be 'sample_id', got {header[:1]}")
    labels = []
    for cell in header[1:]:
        if not cell.startswith("p_"):
            raise DataError(f"probability columns must be named p_<label>, got '{cell}'")
        labels.append(cell[2:])
    if tuple(labels) != tuple(expected_labels):
        raise LabelMismatchError(
            f"file labels {labels} do not match expected {list(expected_labels)}"
        )

    table: dict[str, np.ndarray] = {}
    for line_no, row in enumerate(rows, start=2):
        if len(row) != len(labels) + 1:
            raise DataError(f"row {line_no}: expected {len(labels) + 1} columns")
        sid = row[0].strip()
        if sid in table:
            raise DuplicateSampleError(f"row {line_no}: duplicate sample id '{sid}'")
        try:
            probs = np.array([float(v) for v in row[1:]], dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"row {line_no}: non-numeric probability: {exc}") from exc
        if np.any(probs < 0) or np.any(probs > 1):
            raise DataError(f"row {line_no}: probabilities outside [0, 1]")
        total = float(probs.sum())
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise RowSumViolationError(f"row {line_no}: probabilities sum to {total}")
        table[sid] = probs / total

    if not table:
        raise DataError(f"probability file has no data rows: {path}")
    return ExternalProbabilityBackend(
        identity=identity or path.stem, classes=tuple(expected_labels), table=table
    )
