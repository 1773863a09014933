"""Standalone pipeline stages composing through an output directory.

Each stage consumes the previous stage's on-disk artifacts and writes its
own under the same --out directory, so `run` and the chained subcommands
produce the same numbers for the same config and seed:

    gen-data           data/ (CSV corpus + manifest)
    make-spectrograms  spectrograms/{train,val,test}/ + corpus.json
    train              checkpoints/ + reports/weights_seed*.json
    evaluate           reports/evaluation_seed*.json
    fuse               reports/fused_seed*.json
    ablate             reports/ablation_seed*.json
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .classifiers import import_external, load as load_checkpoint, save as save_checkpoint
from .classifiers.external import ExternalProbabilityBackend
from .ensemble import (
    EnsembleWeights,
    ablate,
    fuse_batch,
    load_weights,
    save_weights,
    validation_split_hash,
)
from .errors import ConfigError, DataError, MissingFileError
from .experiment import (
    ExperimentConfig,
    build_datasets,
    default_subsets,
    evaluate_pool,
    ingest,
    load_spectrogram_corpus,
    score_pool,
    split_segments,
    train_pool,
    write_spectrogram_corpus,
    _sanitize,
)
from .synthgen import export_corpus, generate_corpus, signature_from_dict


def _write_json(doc: dict | list, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_sanitize(doc), indent=2, sort_keys=True) + "\n")
    return path


def gen_data(config: ExperimentConfig) -> Path:
    """Export the configured synthetic corpus as a CSV + manifest tree."""
    data = config.require_data()
    if "synth" not in data:
        raise ConfigError("gen-data needs a synthetic data source in the config")
    synth = data["synth"]
    signatures = [signature_from_dict(s) for s in synth["signatures"]]
    segments = generate_corpus(
        signatures,
        per_class=int(synth["per_class"]),
        duration_s=float(synth["duration_s"]),
        sample_rate_hz=float(synth["sample_rate_hz"]),
        seed=config.seed,
    )
    return export_corpus(segments, Path(config.out_dir) / "data")


def make_spectrograms(config: ExperimentConfig) -> dict:
    """Ingest, split, and persist the spectrogram corpus for later stages."""
    segments = ingest(config)
    splits = split_segments(segments, config.split, config.seed)
    datasets = build_datasets(splits, config)
    return write_spectrogram_corpus(datasets, Path(config.out_dir), config)


def train(config: ExperimentConfig) -> dict:
    """Train the pool on the stored corpus; write checkpoints and weights."""
    out = Path(config.out_dir)
    datasets = load_spectrogram_corpus(out)
    backends = train_pool(config, datasets)
    scores, _ = score_pool(backends, datasets["val"], config.averaging)
    weights = EnsembleWeights.from_scores(scores)
    val_hash = validation_split_hash(datasets["val"].sample_ids)

    checkpoints = {}
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    for member in config.pool:
        if member.backend in ("softmax", "cnn"):
            rel = f"checkpoints/{member.identity}_seed{config.seed}.ckpt"
            save_checkpoint(backends[member.identity], out / rel)
            checkpoints[member.identity] = rel

    save_weights(
        weights,
        out / "reports" / f"weights_seed{config.seed}.json",
        averaging=config.averaging,
        validation_hash=val_hash,
    )
    summary = {
        "seed": config.seed,
        "validation_split_hash": val_hash,
        "classifiers": {
            identity: {
                "score": scores[identity].to_dict(),
                "weight": float(
                    dict(zip(weights.identities, weights.values))[identity]
                ),
                "checkpoint": checkpoints.get(identity),
            }
            for identity in backends
        },
    }
    _write_json(summary, out / "reports" / f"scores_seed{config.seed}.json")
    return summary


def _load_pool_for_inference(
    config: ExperimentConfig, classes: tuple[str, ...], out: Path
) -> dict[str, object]:
    backends: dict[str, object] = {}
    for member in config.pool:
        if member.backend == "external":
            backends[member.identity] = import_external(
                member.csv, expected_labels=classes, identity=member.identity
            )
            continue
        ckpt = out / "checkpoints" / f"{member.identity}_seed{config.seed}.ckpt"
        if not ckpt.exists():
            raise DataError(
                f"missing checkpoint {ckpt} for '{member.identity}'; run train first"
            )
        model = load_checkpoint(ckpt)
        if tuple(model.classes) != tuple(classes):
            raise DataError(
                f"checkpoint {ckpt} was trained on classes {model.classes}, "
                f"expected {classes}"
            )
        backends[member.identity] = model
    return backends


def evaluate(config: ExperimentConfig) -> dict:
    """Score every pool member on the stored test split."""
    out = Path(config.out_dir)
    datasets = load_spectrogram_corpus(out)
    backends = _load_pool_for_inference(config, datasets["test"].classes, out)
    reports, _ = evaluate_pool(backends, datasets["test"], config.averaging)
    doc = {"seed": config.seed, "split": "test", "classifiers": reports}
    _write_json(doc, out / "reports" / f"evaluation_seed{config.seed}.json")
    return doc


def _read_labels_csv(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise MissingFileError(f"labels file not found: {p}")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["sample_id", "label"]:
            raise DataError(f"labels file must have header 'sample_id,label': {p}")
        return {row[0].strip(): row[1].strip() for row in reader if row}


def _external_csv_labels(path: str) -> tuple[str, ...]:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header or header[0].strip() != "sample_id":
        raise DataError(f"probability file must start with a sample_id column: {path}")
    return tuple(cell.strip()[2:] for cell in header[1:])


def _resolve_test_probabilities(config: ExperimentConfig, out: Path):
    """Common input resolution for fuse and ablate.

    Pipeline mode (a stored corpus exists): native checkpoints and external
    files predict on the stored test split. External-only mode: sample ids
    come from the first CSV and labels, when given, from labels_csv.
    """
    corpus_file = out / "spectrograms" / "corpus.json"
    if corpus_file.exists():
        datasets = load_spectrogram_corpus(out)
        test = datasets["test"]
        backends = _load_pool_for_inference(config, test.classes, out)
        probs = {i: b.predict_proba_dataset(test) for i, b in backends.items()}
        return test.sample_ids, test.labels, test.classes, probs

    non_external = [m.identity for m in config.pool if m.backend != "external"]
    if non_external:
        raise DataError(
            f"no spectrogram corpus under {out} and pool members {non_external} "
            "are not external; run make-spectrograms + train first"
        )
    classes = config.classes or _external_csv_labels(config.pool[0].csv)
    backends = {
        m.identity: import_external(m.csv, expected_labels=classes, identity=m.identity)
        for m in config.pool
    }
    first = backends[config.pool[0].identity]
    sample_ids = first.sample_ids
    probs = {i: b.predict_proba_ids(sample_ids) for i, b in backends.items()}

    true_labels = None
    if config.labels_csv:
        label_map = _read_labels_csv(config.labels_csv)
        missing = [sid for sid in sample_ids if sid not in label_map]
        if missing:
            raise DataError(f"labels file lacks sample id(s): {missing[:5]}")
        index = {c: i for i, c in enumerate(classes)}
        try:
            true_labels = np.array([index[label_map[sid]] for sid in sample_ids])
        except KeyError as exc:
            raise DataError(f"labels file uses unknown class {exc}") from exc
    return sample_ids, true_labels, classes, probs


def _load_stage_weights(config: ExperimentConfig, out: Path) -> EnsembleWeights:
    if config.weights_file:
        path = Path(config.weights_file)
    else:
        path = out / "reports" / f"weights_seed{config.seed}.json"
    if not path.exists():
        raise DataError(f"missing weights file {path}; run train or set weights_file")
    return load_weights(path)


def fuse(config: ExperimentConfig) -> dict:
    """Fuse the pool's test probabilities into final decisions."""
    out = Path(config.out_dir)
    sample_ids, true_labels, classes, probs = _resolve_test_probabilities(config, out)
    weights = _load_stage_weights(config, out).subset([m.identity for m in config.pool])

    stack = np.stack([probs[m.identity] for m in config.pool], axis=1)
    fused = fuse_batch(
        weights,
        stack,
        true_labels=true_labels,
        rule=config.decision_rule,
        averaging=config.averaging,
        labels=tuple(classes),
    )
    doc = {
        "seed": config.seed,
        "decision_rule": config.decision_rule,
        "classes": list(classes),
        "sample_ids": list(sample_ids),
        "fused": fused["fused"],
        "predictions": [classes[i] for i in fused["predictions"]],
        "weights": {
            m.identity: float(w) for m, w in zip(config.pool, weights.values)
        },
    }
    if "metrics" in fused:
        doc["metrics"] = fused["metrics"]
    _write_json(doc, out / "reports" / f"fused_seed{config.seed}.json")
    return doc


def run_ablation(config: ExperimentConfig) -> list[dict]:
    """Evaluate fused metrics over classifier subsets (default: singletons
    plus the full pool)."""
    out = Path(config.out_dir)
    sample_ids, true_labels, classes, probs = _resolve_test_probabilities(config, out)
    if true_labels is None:
        raise DataError("ablation needs true labels (stored corpus or labels_csv)")
    weights = _load_stage_weights(config, out)
    identities = [m.identity for m in config.pool]
    subsets = config.ablation_subsets or default_subsets(identities)
    rows = ablate(
        weights,
        probs,
        true_labels,
        subsets,
        rule=config.decision_rule,
        averaging=config.averaging,
    )
    _write_json(rows, out / "reports" / f"ablation_seed{config.seed}.json")
    return rows
