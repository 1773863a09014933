"""End-to-end experiment orchestration.

One JSON config drives the whole pipeline: ingest (synthetic generation or
manifest loading), stratified splitting, spectrogram/image feature building,
pool training, validation-metric weighting, fusion, evaluation, and ablation.
Every stage is also runnable standalone over on-disk artifacts (see cli),
and all randomness flows from the single config seed, so reports are
reproducible byte for byte apart from wall-clock timings.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .classifiers import (
    CnnHyper,
    SoftmaxHyper,
    SpectrogramDataset,
    import_external,
    load as load_checkpoint,
    save as save_checkpoint,
    train_cnn_on_dataset,
    train_softmax_on_dataset,
)
from .ensemble import (
    EnsembleWeights,
    ablate,
    fuse_batch,
    load_weights,
    save_weights,
    validation_split_hash,
)
from .errors import ConfigError, DataError, StageError
from .kernels import KERNEL_BACKEND
from .metrics import ClassifierScore, auc_ovr_report, confusion, metrics_report
from .render import (
    RenderParams,
    SpectralImage,
    export_png,
    load_png,
    render,
    write_sidecar,
)
from .signal_io import (
    TimeSeriesSegment,
    load_manifest,
    normalize,
    read_entry,
    segment as cut_segments,
    stratified_split,
)
from .stft import Spectrogram, StftParams, stft
from .synthgen import (
    generate_corpus,
    rotor_demo_signatures,
    signature_from_dict,
    signature_to_dict,
)

SPLIT_NAMES = ("train", "val", "test")

_TOP_KEYS = {
    "seed", "out_dir", "data", "split", "stft", "render", "pool",
    "averaging", "decision_rule", "emit_images", "ablation",
    "weights_file", "labels_csv", "classes",
}
_SPLIT_KEYS = {"train", "test", "val_within_train"}
_SYNTH_KEYS = {"signatures", "preset", "per_class", "duration_s", "sample_rate_hz", "normalize"}
_MANIFEST_KEYS = {"manifest", "segment", "normalize"}
_SEGMENT_KEYS = {"length", "length_s", "hop", "full_file"}
_POOL_KEYS = {"backend", "identity", "hyper", "csv"}


def rotor_benchmark_config(seed: int, out_dir: str, per_class: int = 600) -> dict:
    """Config for the scaled ensemble-benefit benchmark.

    Five rotor-style classes at 600 segments each by default: 500 reach the
    training pool (85/15 train/validation) and 100 are held out for testing,
    per class. The pool mixes linear models at three feature resolutions
    with a small CNN so errors decorrelate.
    """
    fraction_test = 100.0 / per_class if per_class > 100 else 1.0 / 6.0
    return {
        "seed": seed,
        "out_dir": out_dir,
        "data": {"synth": {"preset": "rotor-demo", "per_class": per_class}},
        "split": {
            "train": 1.0 - fraction_test,
            "test": fraction_test,
            "val_within_train": 0.15,
        },
        "stft": {"window_len": 256, "hop": 32, "window_fn": "hann", "fft_pad": 256},
        "render": {"image_size": 32, "db_floor": -80.0, "colormap": "gray"},
        "pool": [
            {"backend": "softmax", "identity": "lin-coarse",
             "hyper": {"feature_size": 8, "lr": 0.3, "epochs": 50, "seed": seed * 7 + 1}},
            {"backend": "softmax", "identity": "lin-mid",
             "hyper": {"feature_size": 12, "lr": 0.3, "epochs": 50, "seed": seed * 7 + 2}},
            {"backend": "softmax", "identity": "lin-fine",
             "hyper": {"feature_size": 16, "lr": 0.3, "epochs": 50, "seed": seed * 7 + 3}},
            {"backend": "cnn", "identity": "cnn-small",
             "hyper": {"lr": 0.2, "epochs": 20, "batch": 32, "seed": seed * 7 + 4,
                        "arch": {"conv_channels": [4, 8], "hidden": 32, "input_size": 32}}},
        ],
        "averaging": "macro",
    }


def derive_seed(seed: int, *key: int) -> int:
    """Stable 64-bit sub-seed from the experiment seed and an integer key."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


@dataclass(frozen=True)
class SplitConfig:
    train: float = 0.82
    test: float = 0.18
    val_within_train: float = 0.15

    def __post_init__(self):
        if abs(self.train + self.test - 1.0) > 1e-9:
            raise ConfigError("split train + test fractions must sum to 1")
        if not 0.0 < self.val_within_train < 1.0:
            raise ConfigError("val_within_train must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "train": self.train,
            "test": self.test,
            "val_within_train": self.val_within_train,
        }


@dataclass(frozen=True)
class PoolMemberConfig:
    backend: str
    identity: str
    hyper: dict = field(default_factory=dict)
    csv: str | None = None

    def __post_init__(self):
        if self.backend not in ("softmax", "cnn", "external"):
            raise ConfigError(f"unknown backend '{self.backend}'")
        if self.backend == "external" and not self.csv:
            raise ConfigError(f"external member '{self.identity}' needs a 'csv' path")

    def to_dict(self) -> dict:
        doc: dict = {"backend": self.backend, "identity": self.identity}
        if self.backend == "external":
            doc["csv"] = self.csv
        else:
            doc["hyper"] = dict(self.hyper)
        return doc


@dataclass
class ExperimentConfig:
    seed: int
    out_dir: Path
    data: dict | None
    split: SplitConfig
    stft_params: StftParams
    render_params: RenderParams
    pool: list[PoolMemberConfig]
    averaging: str = "macro"
    decision_rule: str = "weighted-mean"
    emit_images: bool = False
    ablation_subsets: list[list[str]] | None = None
    weights_file: str | None = None
    labels_csv: str | None = None
    classes: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.pool:
            raise ConfigError("classifier pool must be nonempty")
        ids = [m.identity for m in self.pool]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate pool identities: {ids}")
        if self.averaging not in ("micro", "macro"):
            raise ConfigError(f"unknown averaging mode '{self.averaging}'")

    def require_data(self) -> dict:
        if self.data is None:
            raise ConfigError("this command needs a 'data' section in the config")
        return self.data

    def to_dict(self) -> dict:
        """Fully materialized snapshot (defaults included) for the report."""
        doc = {
            "seed": self.seed,
            "out_dir": str(self.out_dir),
            "data": self.data,
            "split": self.split.to_dict(),
            "stft": self.stft_params.to_dict(),
            "render": self.render_params.to_dict(),
            "pool": [m.to_dict() for m in self.pool],
            "averaging": self.averaging,
            "decision_rule": self.decision_rule,
            "emit_images": self.emit_images,
        }
        if self.ablation_subsets is not None:
            doc["ablation"] = {"subsets": self.ablation_subsets}
        if self.weights_file:
            doc["weights_file"] = self.weights_file
        if self.labels_csv:
            doc["labels_csv"] = self.labels_csv
        if self.classes:
            doc["classes"] = list(self.classes)
        return doc


def _reject_unknown(doc: dict, known: set[str], where: str) -> None:
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown {where} field(s): {sorted(unknown)}")


def _resolve(path_like: str, base_dir: Path) -> str:
    p = Path(path_like)
    return str(p if p.is_absolute() else (base_dir / p).resolve())


def _parse_data(doc: dict, base_dir: Path) -> dict:
    if "synth" in doc:
        if len(doc) != 1:
            raise ConfigError("data section must be either {'synth': ...} or a manifest")
        synth = dict(doc["synth"])
        _reject_unknown(synth, _SYNTH_KEYS, "data.synth")
        if "preset" in synth:
            if synth["preset"] != "rotor-demo":
                raise ConfigError(f"unknown preset '{synth['preset']}'")
            if "signatures" in synth:
                raise ConfigError("give either 'preset' or 'signatures', not both")
            synth["signatures"] = [
                signature_to_dict(s) for s in rotor_demo_signatures()
            ]
            del synth["preset"]
        if "signatures" not in synth or not synth["signatures"]:
            raise ConfigError("data.synth needs signatures (or a preset)")
        synth.setdefault("per_class", 100)
        synth.setdefault("duration_s", 1.0)
        synth.setdefault("sample_rate_hz", 512.0)
        synth.setdefault("normalize", "zscore")
        # parse eagerly so config errors surface before any work
        [signature_from_dict(s) for s in synth["signatures"]]
        return {"synth": synth}

    _reject_unknown(doc, _MANIFEST_KEYS, "data")
    if "manifest" not in doc:
        raise ConfigError("data section needs 'synth' or 'manifest'")
    seg = dict(doc.get("segment", {}))
    _reject_unknown(seg, _SEGMENT_KEYS, "data.segment")
    seg.setdefault("full_file", False)
    if not seg["full_file"] and "length" not in seg:
        seg.setdefault("length_s", 1.0)
    seg.setdefault("hop", None)
    return {
        "manifest": _resolve(doc["manifest"], base_dir),
        "segment": seg,
        "normalize": doc.get("normalize", "zscore"),
    }


def load_config(
    path: str | Path,
    seed_override: int | None = None,
    out_override: str | None = None,
    emit_images_override: bool | None = None,
) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(
        doc,
        base_dir=path.parent.resolve(),
        seed_override=seed_override,
        out_override=out_override,
        emit_images_override=emit_images_override,
    )


def parse_config(
    doc: dict,
    base_dir: Path | None = None,
    seed_override: int | None = None,
    out_override: str | None = None,
    emit_images_override: bool | None = None,
) -> ExperimentConfig:
    base_dir = Path(base_dir or Path.cwd())
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")

    seed = int(doc.get("seed", 0)) if seed_override is None else int(seed_override)
    out_dir = Path(out_override or doc.get("out_dir", "out"))

    data = _parse_data(doc["data"], base_dir) if "data" in doc else None

    split_doc = dict(doc.get("split", {}))
    _reject_unknown(split_doc, _SPLIT_KEYS, "split")
    split = SplitConfig(**split_doc)

    try:
        stft_params = StftParams.from_dict(doc.get("stft", {}))
        render_params = RenderParams.from_dict(doc.get("render", {}))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad stft/render section: {exc}") from exc

    pool = []
    for i, member in enumerate(doc.get("pool", [])):
        _reject_unknown(member, _POOL_KEYS, f"pool[{i}]")
        if "backend" not in member or "identity" not in member:
            raise ConfigError(f"pool[{i}] needs 'backend' and 'identity'")
        hyper = dict(member.get("hyper", {}))
        hyper.setdefault("seed", derive_seed(seed, 200 + i))
        csv = member.get("csv")
        pool.append(
            PoolMemberConfig(
                backend=member["backend"],
                identity=member["identity"],
                hyper=hyper,
                csv=_resolve(csv, base_dir) if csv else None,
            )
        )

    ablation = None
    if "ablation" in doc:
        _reject_unknown(doc["ablation"], {"subsets"}, "ablation")
        ablation = [list(s) for s in doc["ablation"]["subsets"]]

    emit = bool(doc.get("emit_images", False))
    if emit_images_override is not None:
        emit = emit_images_override

    return ExperimentConfig(
        seed=seed,
        out_dir=out_dir,
        data=data,
        split=split,
        stft_params=stft_params,
        render_params=render_params,
        pool=pool,
        averaging=doc.get("averaging", "macro"),
        decision_rule=doc.get("decision_rule", "weighted-mean"),
        emit_images=emit,
        ablation_subsets=ablation,
        weights_file=_resolve(doc["weights_file"], base_dir) if doc.get("weights_file") else None,
        labels_csv=_resolve(doc["labels_csv"], base_dir) if doc.get("labels_csv") else None,
        classes=tuple(doc["classes"]) if doc.get("classes") else None,
    )


# ---------------------------------------------------------------------------
# pipeline stages


def ingest(config: ExperimentConfig) -> list[TimeSeriesSegment]:
    """Produce normalized labeled segments from the configured data source."""
    data = config.require_data()
    if "synth" in data:
        synth = data["synth"]
        signatures = [signature_from_dict(s) for s in synth["signatures"]]
        segments = generate_corpus(
            signatures,
            per_class=int(synth["per_class"]),
            duration_s=float(synth["duration_s"]),
            sample_rate_hz=float(synth["sample_rate_hz"]),
            seed=config.seed,
        )
        mode = synth["normalize"]
        return [normalize(s, mode) for s in segments]

    manifest = load_manifest(data["manifest"])
    seg_cfg = data["segment"]
    mode = data["normalize"]
    segments: list[TimeSeriesSegment] = []
    expected_full_len: int | None = None
    for idx, entry in enumerate(manifest.entries):
        signal = read_entry(data["manifest"], entry)
        if seg_cfg.get("full_file"):
            length = signal.size
            if expected_full_len is None:
                expected_full_len = length
            elif length != expected_full_len:
                raise DataError(
                    "full_file segmentation needs equal-length recordings; "
                    f"{entry.path} has {length} samples, expected {expected_full_len}"
                )
            hop = length
        elif "length" in seg_cfg:
            length = int(seg_cfg["length"])
            hop = seg_cfg.get("hop") or length // 2
        else:
            length = int(round(float(seg_cfg["length_s"]) * manifest.sample_rate_hz))
            hop = seg_cfg.get("hop") or length // 2
        for seg in cut_segments(
            signal,
            manifest.sample_rate_hz,
            length,
            hop,
            label=entry.label,
            entry_index=idx,
        ):
            segments.append(normalize(seg, mode))
    return segments


def split_segments(
    segments: list[TimeSeriesSegment], split: SplitConfig, seed: int
) -> dict[str, list[TimeSeriesSegment]]:
    """Two stratified passes: carve off the test set, then validation."""
    trainval, test = stratified_split(segments, (split.train, split.test), seed)
    train, val = stratified_split(
        trainval,
        (1.0 - split.val_within_train, split.val_within_train),
        derive_seed(seed, 1),
    )
    return {"train": train, "val": val, "test": test}


def build_dataset(
    segments: list[TimeSeriesSegment],
    classes: tuple[str, ...],
    stft_params: StftParams,
    render_params: RenderParams,
    split_name: str,
) -> SpectrogramDataset:
    class_index = {c: i for i, c in enumerate(classes)}
    spectrograms, images, labels, ids = [], [], [], []
    for i, seg in enumerate(segments):
        spec = stft(seg, stft_params)
        image = render(
            spec,
            image_size=render_params.image_size,
            db_floor=render_params.db_floor,
            colormap=render_params.colormap,
            label=seg.label,
            source_ref=seg.source_ref,
        )
        spectrograms.append(spec)
        images.append(image)
        labels.append(class_index[seg.label])
        ids.append(f"{split_name}-{i:05d}")
    return SpectrogramDataset(
        spectrograms=spectrograms,
        images=images,
        labels=np.array(labels, dtype=np.int64),
        sample_ids=ids,
        classes=classes,
    )


def build_datasets(
    splits: dict[str, list[TimeSeriesSegment]],
    config: ExperimentConfig,
) -> dict[str, SpectrogramDataset]:
    labels = sorted({seg.label for segs in splits.values() for seg in segs})
    classes = tuple(labels)
    return {
        name: build_dataset(splits[name], classes, config.stft_params, config.render_params, name)
        for name in SPLIT_NAMES
    }


def train_pool(
    config: ExperimentConfig, datasets: dict[str, SpectrogramDataset]
) -> dict[str, object]:
    """Train (or load) every pool member; returns identity -> backend."""
    classes = datasets["train"].classes
    backends: dict[str, object] = {}
    for member in config.pool:
        if member.backend == "softmax":
            hyper = _softmax_hyper(member.hyper)
            backends[member.identity] = train_softmax_on_dataset(
                datasets["train"], hyper, identity=member.identity
            )
        elif member.backend == "cnn":
            hyper = _cnn_hyper(member.hyper)
            backends[member.identity] = train_cnn_on_dataset(
                datasets["train"], hyper, identity=member.identity
            )
        else:
            backends[member.identity] = import_external(
                member.csv, expected_labels=classes, identity=member.identity
            )
    return backends


def _softmax_hyper(doc: dict) -> SoftmaxHyper:
    try:
        return SoftmaxHyper(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad softmax hyperparameters: {exc}") from exc


def _cnn_hyper(doc: dict) -> CnnHyper:
    try:
        return CnnHyper.from_dict(doc)
    except TypeError as exc:
        raise ConfigError(f"bad cnn hyperparameters: {exc}") from exc


def score_pool(
    backends: dict[str, object],
    val_dataset: SpectrogramDataset,
    averaging: str,
) -> tuple[dict[str, ClassifierScore], dict[str, np.ndarray]]:
    """Validation metrics per classifier -- the inputs to the weights."""
    scores: dict[str, ClassifierScore] = {}
    probs: dict[str, np.ndarray] = {}
    class_count = len(val_dataset.classes)
    for identity, backend in backends.items():
        p = backend.predict_proba_dataset(val_dataset)
        preds = np.argmax(p, axis=1)
        cm = confusion(val_dataset.labels, preds, class_count, labels=val_dataset.classes)
        auc = auc_ovr_report(val_dataset.labels, p).macro
        scores[identity] = ClassifierScore.from_confusion(cm, auc, averaging)
        probs[identity] = p
    return scores, probs


def evaluate_pool(
    backends: dict[str, object],
    dataset: SpectrogramDataset,
    averaging: str,
) -> tuple[dict[str, dict], dict[str, np.ndarray]]:
    """Per-classifier metrics report and probabilities on one dataset."""
    reports: dict[str, dict] = {}
    probs: dict[str, np.ndarray] = {}
    class_count = len(dataset.classes)
    for identity, backend in backends.items():
        p = backend.predict_proba_dataset(dataset)
        preds = np.argmax(p, axis=1)
        cm = confusion(dataset.labels, preds, class_count, labels=dataset.classes)
        reports[identity] = metrics_report(
            cm, true_labels=dataset.labels, probabilities=p, mode=averaging
        )
        probs[identity] = p
    return reports, probs


def default_subsets(identities: list[str]) -> list[list[str]]:
    """Singletons plus (when larger) the full pool."""
    subsets: list[list[str]] = [[i] for i in identities]
    if len(identities) > 1:
        subsets.append(list(identities))
    return subsets


# ---------------------------------------------------------------------------
# artifact io


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def config_fingerprint(config: ExperimentConfig) -> str:
    """Content hash of the config snapshot, ignoring the output location."""
    import hashlib

    doc = config.to_dict()
    doc.pop("out_dir", None)
    blob = json.dumps(_sanitize(doc), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:8]


def report_schema() -> dict:
    return json.loads(
        resources.files("wpedl").joinpath("data/report.schema.json").read_text()
    )


def emit_report(report: dict, path: Path) -> Path:
    """Validate against the shipped schema, then write deterministic JSON."""
    clean = _sanitize(report)
    jsonschema.validate(clean, report_schema())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(clean, indent=2, sort_keys=True) + "\n")
    return path


def write_spectrogram_corpus(
    datasets: dict[str, SpectrogramDataset],
    out_dir: Path,
    config: ExperimentConfig,
) -> dict:
    """Persist every split as PNG + sidecar + raw magnitude (.npy)."""
    spectro_dir = out_dir / "spectrograms"
    counts = {}
    for split_name, ds in datasets.items():
        split_dir = spectro_dir / split_name
        split_dir.mkdir(parents=True, exist_ok=True)
        for spec, image, sid in zip(ds.spectrograms, ds.images, ds.sample_ids):
            png = split_dir / f"{sid}.png"
            export_png(image, png)
            write_sidecar(image, png, sample_id=sid, split=split_name)
            np.save(split_dir / f"{sid}.npy", spec.magnitude)
        counts[split_name] = len(ds)
    corpus = {
        "classes": list(datasets["train"].classes),
        "seed": config.seed,
        "counts": counts,
        "stft": config.stft_params.to_dict(),
        "render": config.render_params.to_dict(),
    }
    (spectro_dir / "corpus.json").write_text(
        json.dumps(corpus, indent=2, sort_keys=True) + "\n"
    )
    return corpus


def load_spectrogram_corpus(out_dir: Path) -> dict[str, SpectrogramDataset]:
    """Rebuild split datasets written by write_spectrogram_corpus."""
    spectro_dir = Path(out_dir) / "spectrograms"
    corpus_file = spectro_dir / "corpus.json"
    if not corpus_file.exists():
        raise DataError(
            f"missing spectrogram corpus at {spectro_dir}; run make-spectrograms first"
        )
    corpus = json.loads(corpus_file.read_text())
    classes = tuple(corpus["classes"])
    class_index = {c: i for i, c in enumerate(classes)}
    datasets = {}
    for split_name in SPLIT_NAMES:
        split_dir = spectro_dir / split_name
        if not split_dir.is_dir():
            raise DataError(f"missing split directory {split_dir}")
        spectrograms, images, labels, ids = [], [], [], []
        for npy in sorted(split_dir.glob("*.npy")):
            sidecar = json.loads(npy.with_suffix(".json").read_text())
            params = StftParams.from_dict(sidecar["stft"])
            spec = Spectrogram(
                magnitude=np.load(npy),
                params=params,
                sample_rate_hz=sidecar["sample_rate_hz"],
            )
            pixels = load_png(npy.with_suffix(".png"))
            image = SpectralImage(
                pixels=pixels,
                colormap=sidecar["render"]["colormap"],
                db_floor=sidecar["render"]["db_floor"],
                stft_params=params,
                sample_rate_hz=sidecar["sample_rate_hz"],
                source_ref=(sidecar["source"]["entry"], sidecar["source"]["offset"]),
                label=sidecar["label"],
            )
            spectrograms.append(spec)
            images.append(image)
            labels.append(class_index[sidecar["label"]])
            ids.append(sidecar["sample_id"])
        datasets[split_name] = SpectrogramDataset(
            spectrograms=spectrograms,
            images=images,
            labels=np.array(labels, dtype=np.int64),
            sample_ids=ids,
            classes=classes,
        )
    return datasets


# ---------------------------------------------------------------------------
# run_experiment


class _StageTimer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, name: str, fn, *args, **kwargs):
        print(f"[wpedl] stage {name} ...", file=sys.stderr)
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = time.perf_counter() - t0
        return result


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the full pipeline and write the experiment report.

    Returns the report dict; the written report's path is in
    report["artifacts"]["report"].
    """
    out = Path(config.out_dir)
    for sub in ("reports", "checkpoints"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    marker = out / ".incomplete"
    marker.write_text("experiment in progress; treat existing outputs as stale\n")

    timer = _StageTimer()
    segments = timer.run("ingest", ingest, config)
    splits = timer.run("split", split_segments, segments, config.split, config.seed)
    datasets = timer.run("features", build_datasets, splits, config)

    if config.emit_images:
        timer.run("emit-images", write_spectrogram_corpus, datasets, out, config)

    backends = timer.run("train", train_pool, config, datasets)
    scores, _ = timer.run(
        "weigh", score_pool, backends, datasets["val"], config.averaging
    )
    weights = EnsembleWeights.from_scores(scores)
    val_hash = validation_split_hash(datasets["val"].sample_ids)
    weights_path = out / "reports" / f"weights_seed{config.seed}.json"
    save_weights(weights, weights_path, averaging=config.averaging, validation_hash=val_hash)

    solo_reports, test_probs = timer.run(
        "evaluate", evaluate_pool, backends, datasets["test"], config.averaging
    )

    def _fuse():
        identities = list(backends)
        stack = np.stack([test_probs[i] for i in identities], axis=1)
        fused = fuse_batch(
            weights.subset(identities),
            stack,
            true_labels=datasets["test"].labels,
            rule=config.decision_rule,
            averaging=config.averaging,
            labels=datasets["test"].classes,
        )
        subsets = config.ablation_subsets or default_subsets(identities)
        rows = ablate(
            weights,
            test_probs,
            datasets["test"].labels,
            subsets,
            rule=config.decision_rule,
            averaging=config.averaging,
        )
        return fused, rows

    fused, ablation_rows = timer.run("fuse", _fuse)

    checkpoints = {}

    def _save_checkpoints():
        for member in config.pool:
            if member.backend in ("softmax", "cnn"):
                rel = f"checkpoints/{member.identity}_seed{config.seed}.ckpt"
                save_checkpoint(backends[member.identity], out / rel)
                checkpoints[member.identity] = rel

    timer.run("checkpoint", _save_checkpoints)

    dataset_info = {
        "classes": list(datasets["train"].classes),
        "counts": {name: len(datasets[name]) for name in SPLIT_NAMES},
        "per_class": {
            name: {
                c: int((datasets[name].labels == i).sum())
                for i, c in enumerate(datasets[name].classes)
            }
            for name in SPLIT_NAMES
        },
    }

    fingerprint = config_fingerprint(config)
    report_rel = f"reports/experiment_{fingerprint}_seed{config.seed}.json"
    report = {
        "schema_version": 1,
        "seed": config.seed,
        "config": config.to_dict(),
        "config_fingerprint": fingerprint,
        "kernel_backend": KERNEL_BACKEND,
        "dataset": dataset_info,
        "classifiers": [
            {
                "identity": member.identity,
                "backend": member.backend,
                "validation_score": scores[member.identity].to_dict(),
                "weight": dict(zip(weights.identities, weights.values.tolist()))[
                    member.identity
                ],
                "test_metrics": solo_reports[member.identity],
                "checkpoint": checkpoints.get(member.identity),
            }
            for member in config.pool
        ],
        "ensemble": {
            "decision_rule": config.decision_rule,
            "averaging": config.averaging,
            "validation_split_hash": val_hash,
            "weights_file": f"reports/weights_seed{config.seed}.json",
            "test_metrics": fused["metrics"],
        },
        "ablation": ablation_rows,
        "artifacts": {
            "report": report_rel,
            "weights": f"reports/weights_seed{config.seed}.json",
            "checkpoints": checkpoints,
            "spectrograms": "spectrograms" if config.emit_images else None,
        },
        "timings": timer.timings,
    }
    emit_report(report, out / report_rel)
    marker.unlink()
    return report
