"""Metric-weighted fusion of classifier probability vectors.

Each classifier's scalar weight is the sum of tanh over its four validation
metrics (precision, recall, f1, AUC), so weights live in [0, 4*tanh(1)] and
grow strictly with every metric. Per sample, the fused vector is the convex
combination sum_i w_i * P_i / sum_i w_i and the decision is its argmax
(ties broken toward the smallest class index). A second decision rule,
``classwise-max``, takes the per-class maximum of weighted probabilities
before normalizing; it is exposed for comparison only.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifiers.base import validate_probability_vector
from .errors import ConfigError, DataError
from .metrics import (
    ClassifierScore,
    auc_ovr_report,
    confusion,
    metrics_report,
)

DECISION_RULES = ("weighted-mean", "classwise-max")

MAX_WEIGHT = 4.0 * math.tanh(1.0)


def compute_weight(score: ClassifierScore) -> float:
    """Scalar ensemble weight: sum of tanh over the four metric values."""
    return sum(math.tanh(v) for v in score.metric_values())


@dataclass(frozen=True)
class WeightedClassifier:
    identity: str
    score: ClassifierScore
    weight: float

    def __post_init__(self):
        expected = compute_weight(self.score)
        if abs(self.weight - expected) > 1e-12:
            raise DataError(
                f"weight {self.weight} for '{self.identity}' does not match "
                f"its metrics (expected {expected})"
            )
        if not 0.0 <= self.weight <= MAX_WEIGHT + 1e-12:
            raise DataError(f"weight {self.weight} outside [0, 4*tanh(1)]")


@dataclass(frozen=True)
class EnsembleWeights:
    members: tuple[WeightedClassifier, ...]

    def __post_init__(self):
        ids = [m.identity for m in self.members]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate classifier identities: {ids}")

    @classmethod
    def from_scores(cls, scores: dict[str, ClassifierScore]) -> "EnsembleWeights":
        return cls(
            members=tuple(
                WeightedClassifier(identity=i, score=s, weight=compute_weight(s))
                for i, s in scores.items()
            )
        )

    @property
    def identities(self) -> tuple[str, ...]:
        return tuple(m.identity for m in self.members)

    @property
    def values(self) -> np.ndarray:
        return np.array([m.weight for m in self.members])

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def subset(self, identities: list[str]) -> "EnsembleWeights":
        by_id = {m.identity: m for m in self.members}
        unknown = [i for i in identities if i not in by_id]
        if unknown:
            raise ConfigError(f"unknown classifier identities: {unknown}")
        return EnsembleWeights(members=tuple(by_id[i] for i in identities))

    def to_dict(self, averaging: str = "macro", validation_hash: str | None = None) -> dict:
        return {
            "averaging": averaging,
            "validation_split_hash": validation_hash,
            "classifiers": {
                m.identity: {"metrics": m.score.to_dict(), "w": m.weight}
                for m in self.members
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EnsembleWeights":
        members = []
        for identity, entry in doc["classifiers"].items():
            score = ClassifierScore.from_dict(entry["metrics"])
            members.append(
                WeightedClassifier(identity=identity, score=score, weight=float(entry["w"]))
            )
        return cls(members=tuple(members))


def load_weights(path: str | Path) -> EnsembleWeights:
    return EnsembleWeights.from_dict(json.loads(Path(path).read_text()))


def save_weights(
    weights: EnsembleWeights,
    path: str | Path,
    averaging: str = "macro",
    validation_hash: str | None = None,
) -> Path:
    path = Path(path)
    doc = weights.to_dict(averaging=averaging, validation_hash=validation_hash)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def validation_split_hash(sample_ids: list[str]) -> str:
    """Stable fingerprint of the samples the weights were derived from."""
    digest = hashlib.sha256("\n".join(sorted(sample_ids)).encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass(frozen=True)
class EnsembleDecision:
    fused: np.ndarray
    predicted_index: int
    coefficients: np.ndarray
    contributions: np.ndarray


def fuse_vectors(
    weight_values: np.ndarray, vectors: np.ndarray, rule: str = "weighted-mean"
) -> np.ndarray:
    """The fusion algebra on raw weight values; scale-invariant in the weights."""
    if rule not in DECISION_RULES:
        raise ConfigError(f"unknown decision rule '{rule}'")
    w = np.asarray(weight_values, dtype=np.float64)
    vectors = np.asarray(vectors, dtype=np.float64)
    total = float(w.sum())
    if total <= 0.0:
        raise DataError("total ensemble weight is zero; pool carries no signal")
    contributions = (w / total)[:, None] * vectors
    if rule == "weighted-mean":
        return contributions.sum(axis=0)
    classwise = contributions.max(axis=0)
    return classwise / classwise.sum()


def fuse(
    weights: EnsembleWeights,
    vectors: np.ndarray,
    rule: str = "weighted-mean",
) -> EnsembleDecision:
    """Combine one sample's per-classifier probability vectors."""
    if rule not in DECISION_RULES:
        raise ConfigError(f"unknown decision rule '{rule}'")
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(weights.members):
        raise DataError(
            f"expected {len(weights.members)} vectors, got shape {vectors.shape}"
        )
    for row in vectors:
        validate_probability_vector(row)

    total = weights.total
    if total <= 0.0:
        raise DataError("total ensemble weight is zero; pool carries no signal")
    coeff = weights.values / total
    fused = fuse_vectors(weights.values, vectors, rule)
    return EnsembleDecision(
        fused=fused,
        predicted_index=int(np.argmax(fused)),
        coefficients=coeff,
        contributions=coeff[:, None] * vectors,
    )


def fuse_batch(
    weights: EnsembleWeights,
    vectors: np.ndarray,
    true_labels=None,
    rule: str = "weighted-mean",
    averaging: str = "macro",
    labels: tuple[str, ...] | None = None,
) -> dict:
    """Fuse a (samples, classifiers, classes) stack; optionally score it.

    Returns fused probabilities, predictions, and, when true labels are
    supplied, a metrics report of the fused predictions.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 3:
        raise DataError(f"expected (samples, classifiers, classes), got {vectors.shape}")

    decisions = [fuse(weights, sample, rule=rule) for sample in vectors]
    fused = (
        np.stack([d.fused for d in decisions])
        if decisions
        else np.empty((0, vectors.shape[2] if vectors.size else 0))
    )
    predictions = np.array([d.predicted_index for d in decisions], dtype=np.int64)
    result = {"fused": fused, "predictions": predictions}

    if true_labels is not None and len(decisions) > 0:
        class_count = fused.shape[1]
        cm = confusion(true_labels, predictions, class_count, labels=labels)
        result["metrics"] = metrics_report(
            cm, true_labels=true_labels, probabilities=fused, mode=averaging
        )
    return result


def ablate(
    weights: EnsembleWeights,
    probabilities: dict[str, np.ndarray],
    true_labels,
    subsets: list[list[str]],
    rule: str = "weighted-mean",
    averaging: str = "macro",
) -> list[dict]:
    """Evaluate the fused pool over classifier subsets.

    Each row reports the fused accuracy, precision, recall, f1, and AUC of
    one subset; duplicate identities within a subset are dropped with a
    warning.
    """
    y = np.asarray(true_labels, dtype=np.int64)
    rows = []
    for subset in subsets:
        if not subset:
            raise ConfigError("ablation subsets must be nonempty")
        deduped = list(dict.fromkeys(subset))
        if len(deduped) != len(subset):
            warnings.warn(f"duplicate identities in subset {subset}; deduplicated")
        sub_weights = weights.subset(deduped)
        stack = np.stack([probabilities[i] for i in deduped], axis=1)
        fused = fuse_batch(sub_weights, stack, true_labels=y, rule=rule, averaging=averaging)
        metrics = fused["metrics"]
        auc = auc_ovr_report(y, fused["fused"])
        rows.append(
            {
                "subset": deduped,
                "accuracy": metrics["accuracy"],
                "precision": metrics["precision"],
                "recall": metrics["recall"],
                "f1": metrics["f1"],
                "auc": auc.macro,
            }
        )
    return rows
