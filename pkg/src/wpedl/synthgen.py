"""Synthetic motor-fault signal generation.

Two kinds of signature are modeled: harmonic current-like signals (a
fundamental plus sidebands at fixed offsets, the classic broken-rotor-bar
pattern) and vibration-like impulsive signals (exponentially decaying bursts
at a repetition rate). Everything is deterministic given a seed, so corpora
are reproducible element for element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, NyquistViolationError
from .signal_io import ManifestEntry, RecordingManifest, TimeSeriesSegment, write_manifest


@dataclass(frozen=True)
class ImpulseTrain:
    """Decaying bursts repeating at a fixed rate (bearing-style texture)."""

    rate_hz: float
    decay_per_s: float
    amplitude: float

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ConfigError("impulse repetition rate must be positive")
        if self.amplitude < 0:
            raise ConfigError("impulse amplitude must be nonnegative")


@dataclass(frozen=True)
class FaultSignature:
    """Spectral recipe for one fault class.

    sidebands are (offset_hz, amplitude) pairs relative to a unit-amplitude
    fundamental; noise_std is the white-noise level on the same scale.
    """

    class_id: str
    fundamental_hz: float
    sidebands: tuple[tuple[float, float], ...] = ()
    impulse: ImpulseTrain | None = None
    noise_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self,
            "sidebands",
            tuple((float(o), float(a)) for o, a in self.sidebands),
        )
        for offset, amp in self.sidebands:
            if offset == 0:
                raise ConfigError("sideband offsets must be nonzero")
            if amp < 0:
                raise ConfigError("sideband amplitudes must be nonnegative")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")

    def component_frequencies(self) -> list[float]:
        freqs = [self.fundamental_hz]
        freqs += [abs(self.fundamental_hz + off) for off, _ in self.sidebands]
        if self.impulse is not None:
            freqs.append(self.impulse.rate_hz)
        return freqs


def generate(
    signature: FaultSignature,
    duration_s: float,
    sample_rate_hz: float,
    seed: int | np.random.SeedSequence,
) -> TimeSeriesSegment:
    """Synthesize one labeled segment from a signature.

    Output is the sum of the configured sinusoids, the optional impulse
    train, and white noise; byte-identical for identical (signature, seed).
    """
    n = int(round(duration_s * sample_rate_hz))
    if n < 16:
        raise ConfigError(f"duration*sample_rate must be >= 16 samples, got {n}")
    fmax = max(signature.component_frequencies())
    if sample_rate_hz <= 2.0 * fmax:
        raise NyquistViolationError(
            f"sample rate {sample_rate_hz} Hz cannot represent a "
            f"{fmax} Hz component (needs > {2.0 * fmax} Hz)"
        )

    t = np.arange(n) / sample_rate_hz
    x = np.sin(2.0 * np.pi * signature.fundamental_hz * t)
    for offset, amp in signature.sidebands:
        x += amp * np.sin(2.0 * np.pi * (signature.fundamental_hz + offset) * t)

    if signature.impulse is not None:
        imp = signature.impulse
        comb = np.zeros(n)
        period = sample_rate_hz / imp.rate_hz
        k = np.arange(0, int(np.floor((n - 1) / period)) + 1)
        comb[np.round(k * period).astype(int)] = imp.amplitude
        # one-pole IIR realizes the exponential tail of every burst at once
        alpha = np.exp(-imp.decay_per_s / sample_rate_hz)
        x += lfilter([1.0], [1.0, -alpha], comb)

    if signature.noise_std > 0:
        rng = np.random.default_rng(seed)
        x += signature.noise_std * rng.standard_normal(n)

    return TimeSeriesSegment(
        samples=x,
        sample_rate_hz=sample_rate_hz,
        label=signature.class_id,
        source_ref=(-1, 0),
    )


def generate_corpus(
    signatures: list[FaultSignature],
    per_class: int,
    duration_s: float,
    sample_rate_hz: float,
    seed: int,
) -> list[TimeSeriesSegment]:
    """Generate per_class segments for every signature.

    Per-segment randomness is derived from (seed, class index, instance
    index) so corpora are reproducible and insensitive to generation order.
    """
    if per_class < 1:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")
    ids = [s.class_id for s in signatures]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate class ids in generation config: {ids}")

    segments = []
    for ci, sig in enumerate(signatures):
        for ii in range(per_class):
            child = np.random.SeedSequence(entropy=seed, spawn_key=(ci, ii))
            segments.append(generate(sig, duration_s, sample_rate_hz, child))
    return segments


def rotor_demo_signatures(
    fundamental_hz: float = 60.0,
    sideband_offset_hz: float = 12.0,
    noise_std: float = 0.2,
) -> list[FaultSignature]:
    """Five rotor-style classes: healthy plus four graded sideband severities.

    Each faulty grade carries a first-order pair at the configured offset and
    a half-amplitude second-order pair at twice the offset, the usual comb
    around the supply fundamental.
    """
    grades = {"HLT": 0.0, "BRB1": 0.1, "BRB2": 0.2, "BRB3": 0.3, "BRB4": 0.4}
    sigs = []
    for class_id, amp in grades.items():
        sidebands: tuple[tuple[float, float], ...] = ()
        if amp > 0:
            sidebands = (
                (-sideband_offset_hz, amp),
                (sideband_offset_hz, amp),
                (-2.0 * sideband_offset_hz, 0.5 * amp),
                (2.0 * sideband_offset_hz, 0.5 * amp),
            )
        sigs.append(
            FaultSignature(
                class_id=class_id,
                fundamental_hz=fundamental_hz,
                sidebands=sidebands,
                noise_std=noise_std,
            )
        )
    return sigs


def bearing_demo_signatures(noise_std: float = 0.2) -> list[FaultSignature]:
    """Three vibration-style classes distinguished by impulse repetition rate."""
    return [
        FaultSignature("HLT", fundamental_hz=30.0, noise_std=noise_std),
        FaultSignature(
            "OR",
            fundamental_hz=30.0,
            impulse=ImpulseTrain(rate_hz=90.0, decay_per_s=600.0, amplitude=2.0),
            noise_std=noise_std,
        ),
        FaultSignature(
            "BF",
            fundamental_hz=30.0,
            impulse=ImpulseTrain(rate_hz=140.0, decay_per_s=900.0, amplitude=2.0),
            noise_std=noise_std,
        ),
    ]


def signature_from_dict(doc: dict) -> FaultSignature:
    """Parse one signature from its JSON form."""
    known = {"class_id", "fundamental_hz", "sidebands", "impulse", "noise_std"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown signature field(s): {sorted(unknown)}")
    impulse = None
    if doc.get("impulse") is not None:
        imp = doc["impulse"]
        impulse = ImpulseTrain(
            rate_hz=float(imp["rate_hz"]),
            decay_per_s=float(imp["decay_per_s"]),
            amplitude=float(imp["amplitude"]),
        )
    return FaultSignature(
        class_id=str(doc["class_id"]),
        fundamental_hz=float(doc["fundamental_hz"]),
        sidebands=tuple((float(o), float(a)) for o, a in doc.get("sidebands", ())),
        impulse=impulse,
        noise_std=float(doc.get("noise_std", 0.0)),
    )


def signature_to_dict(sig: FaultSignature) -> dict:
    doc: dict = {
        "class_id": sig.class_id,
        "fundamental_hz": sig.fundamental_hz,
        "sidebands": [[o, a] for o, a in sig.sidebands],
        "noise_std": sig.noise_std,
    }
    if sig.impulse is not None:
        doc["impulse"] = {
            "rate_hz": sig.impulse.rate_hz,
            "decay_per_s": sig.impulse.decay_per_s,
            "amplitude": sig.impulse.amplitude,
        }
    return doc


def export_corpus(
    segments: list[TimeSeriesSegment],
    out_dir: str | Path,
    dataset_tag: str = "synthetic",
) -> Path:
    """Write segments as one CSV per segment plus a manifest.

    The result round-trips through load_manifest with length = segment
    length (one window per file).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rates = {s.sample_rate_hz for s in segments}
    if len(rates) != 1:
        raise ConfigError(f"corpus mixes sample rates: {sorted(rates)}")

    counters: dict[str, int] = {}
    entries = []
    for seg in segments:
        idx = counters.get(seg.label, 0)
        counters[seg.label] = idx + 1
        rel = Path(seg.label) / f"{seg.label}_{idx:05d}.csv"
        target = out_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(target, seg.samples, fmt="%.17g", delimiter=",")
        entries.append(ManifestEntry(path=str(rel), channel=0, label=seg.label))

    manifest = RecordingManifest(
        dataset_tag=dataset_tag,
        sample_rate_hz=rates.pop(),
        label_set=tuple(sorted(counters)),
        entries=tuple(entries),
    )
    return write_manifest(manifest, out_dir / "manifest.json")
