"""Recording to labelled spike windows.

Pipeline: segment into 200 ms windows -> drop label-bleed windows ->
oversample minority classes -> stratified train/test split -> encode.
Also generates synthetic multi-channel EMG when no recordings are at hand.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .encoders import (AdmParams, AnalogRecording, PfmParams, SpikeTrain, adm_encode_recording,
                       pfm_calibrate, pfm_encode_recording)

WINDOW_MS = 200.0


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Window:
    """A segment of a recording, before encoding."""

    start: int  # first sample
    stop: int  # one past the last sample
    label: int
    subject: int = 0
    session: int = 0
    duplicate: bool = False

    def source_key(self) -> tuple:
        return (self.subject, self.session, self.start)


@dataclass
class LabeledWindow:
    spikes: SpikeTrain  # input channels, times relative to window start
    label: int
    source: tuple  # (subject, session, offset sample)
    duplicate: bool = False

    def source_key(self) -> tuple:
        return tuple(self.source)


def segment(recording: AnalogRecording, window_ms: float = WINDOW_MS, seed: int = 0,
            subject: int = 0, session: int = 0) -> list[Window]:
    """Non-overlapping windows labelled by majority vote, in seeded shuffled order."""
    if recording.labels is None:
        raise DataError("segmenting needs per-sample labels")
    n = int(round(window_ms * 1e-3 * recording.sample_rate))
    if n < 1:
        raise DataError("window shorter than one sample")
    out = []
    for start in range(0, recording.n_samples - n + 1, n):
        labels = recording.labels[start:start + n]
        values, counts = np.unique(labels, return_counts=True)
        out.append(Window(start, start + n, int(values[np.argmax(counts)]), subject, session))
    order = np.random.default_rng([seed, 21]).permutation(len(out))
    return [out[i] for i in order]


def rms_features(recording: AnalogRecording, windows) -> np.ndarray:
    return np.array([np.sqrt(np.mean(recording.samples[:, w.start:w.stop] ** 2, axis=1))
                     for w in windows])


def filter_label_bleed(windows: list[Window], recording: AnalogRecording) -> list[Window]:
    """Drop windows whose RMS vector is nearer the centroid of an adjacent, differently
    labelled state than the centroid of their own label."""
    if not windows:
        return []
    feats = rms_features(recording, windows)
    labels = np.array([w.label for w in windows])
    centroids = {c: feats[labels == c].mean(axis=0) for c in np.unique(labels)}
    chrono = sorted(range(len(windows)), key=lambda i: windows[i].source_key())
    neighbours = defaultdict(set)
    for a, b in zip(chrono, chrono[1:]):
        wa, wb = windows[a], windows[b]
        if (wa.subject, wa.session) != (wb.subject, wb.session) or wa.stop != wb.start:
            continue
        if wa.label != wb.label:
            neighbours[a].add(wb.label)
            neighbours[b].add(wa.label)
    keep = []
    for i, w in enumerate(windows):
        own = np.linalg.norm(feats[i] - centroids[w.label])
        if any(np.linalg.norm(feats[i] - centroids[c]) < own for c in neighbours[i]):
            continue
        keep.append(w)
    return keep


def oversample(windows: list, seed: int = 0) -> list:
    """Duplicate random minority-class windows until every class matches the largest."""
    by_class = defaultdict(list)
    for w in windows:
        by_class[w.label].append(w)
    if not by_class:
        return []
    target = max(len(v) for v in by_class.values())
    rng = np.random.default_rng([seed, 23])
    out = list(windows)
    for label in sorted(by_class):
        pool = by_class[label]
        picks = rng.integers(0, len(pool), size=target - len(pool))
        out += [replace(pool[i], duplicate=True) for i in picks]
    return out


def split(windows: list, ratio: float = 0.8, seed: int = 0) -> tuple[list, list]:
    """Stratified split on distinct sources; duplicates follow their original's side."""
    if not 0 < ratio < 1:
        raise DataError("ratio must be in (0, 1)")
    rng = np.random.default_rng([seed, 29])
    by_class = defaultdict(list)
    for w in windows:
        key = w.source_key()
        if key not in by_class[w.label]:
            by_class[w.label].append(key)
    train_keys = set()
    for label in sorted(by_class):
        keys = sorted(by_class[label])
        keys = [keys[i] for i in rng.permutation(len(keys))]
        train_keys.update(keys[:int(round(ratio * len(keys)))])
    train = [w for w in windows if w.source_key() in train_keys]
    test = [w for w in windows if w.source_key() not in train_keys]
    return train, test


def kfold(windows: list, k: int = 3, seed: int = 0) -> list[tuple[list, list]]:
    """Stratified k-fold over distinct sources; duplicates stay with their original."""
    if k < 2:
        raise DataError("k must be >= 2")
    rng = np.random.default_rng([seed, 31])
    fold_of = {}
    by_class = defaultdict(list)
    for w in windows:
        key = w.source_key()
        if key not in by_class[w.label]:
            by_class[w.label].append(key)
    for label in sorted(by_class):
        keys = sorted(by_class[label])
        for pos, i in enumerate(rng.permutation(len(keys))):
            fold_of[keys[i]] = pos % k
    return [([w for w in windows if fold_of[w.source_key()] != f],
             [w for w in windows if fold_of[w.source_key()] == f]) for f in range(k)]


# ---------------------------------------------------------------------------
# encoding


def encode_recording(recording: AnalogRecording, method: str, adm: AdmParams | None = None,
                     pfm: PfmParams | None = None) -> SpikeTrain:
    if method == "adm":
        return adm_encode_recording(recording, adm or AdmParams())
    if method == "pfm":
        params = pfm or PfmParams()
        if params.scale_range is None:
            params = pfm_calibrate(recording, params)
        return pfm_encode_recording(recording, params)
    raise DataError(f"unknown encoder {method!r}")


def encode_windows(recording: AnalogRecording, windows: list[Window], method: str = "adm",
                   adm: AdmParams | None = None, pfm: PfmParams | None = None,
                   encoded: SpikeTrain | None = None) -> list[LabeledWindow]:
    """Encode the whole session once, then cut each window out of the spike stream."""
    if encoded is None:
        encoded = encode_recording(recording, method, adm, pfm)
    us = 1e6 / recording.sample_rate
    return [LabeledWindow(encoded.window(w.start * us, w.stop * us), w.label,
                          w.source_key(), w.duplicate) for w in windows]


# ---------------------------------------------------------------------------
# archives and label files


def labels_from_intervals(path, n_samples: int, sample_rate: float, default: int = 0) -> np.ndarray:
    """Per-sample labels from a ``t_start_s,t_end_s,label`` CSV."""
    labels = np.full(n_samples, default, dtype=np.int64)
    t = np.arange(n_samples) / sample_rate
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            sel = (t >= float(row["t_start_s"])) & (t < float(row["t_end_s"]))
            labels[sel] = int(row["label"])
    return labels


def save_windows(directory, windows: list[LabeledWindow]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, w in enumerate(windows):
        name = f"window_{i:05d}.csv"
        w.spikes.to_csv(d / name)
        manifest.append({"file": name, "label": int(w.label), "source": list(w.source),
                         "duplicate": bool(w.duplicate), "channels": w.spikes.channels,
                         "duration_us": w.spikes.duration})
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def load_windows(directory) -> list[LabeledWindow]:
    d = Path(directory)
    out = []
    for entry in json.loads((d / "manifest.json").read_text()):
        sp = SpikeTrain.from_csv(d / entry["file"], entry["channels"], entry["duration_us"])
        out.append(LabeledWindow(sp, entry["label"], tuple(entry["source"]), entry["duplicate"]))
    return out


# ---------------------------------------------------------------------------
# synthetic EMG


DEFAULT_PROFILES = (
    (0.90, 0.80, 0.30, 0.10, 0.05, 0.10, 0.40, 0.70),  # rock: flexor-heavy
    (0.10, 0.25, 0.70, 0.90, 0.80, 0.30, 0.10, 0.05),  # paper: extensor-heavy
    (0.20, 0.05, 0.10, 0.30, 0.90, 0.95, 0.60, 0.20),  # scissors
)
DEFAULT_BANDS = ((0.7, 0.3), (0.3, 0.7), (0.5, 0.5))


@dataclass
class SynthSpec:
    """Synthetic EMG: label 0 is rest, labels 1..n are gestures with their own profiles.

    Trials are scaled by gains log-spaced over ``gain_range`` to give the corpus a wide
    amplitude dynamic range. Every gesture gets the same set of gains, so loudness
    alone carries no class information.
    """

    profiles: tuple = DEFAULT_PROFILES  # per gesture, 8 channel amplitudes in [0, 1]
    band_weights: tuple = DEFAULT_BANDS  # per gesture, weights of (0.5-50, 50-100) Hz
    trial_duration: float = 2.0  # s
    rest_duration: float = 1.0  # s
    trials_per_class: int = 5
    amplitude: float = 4.0  # signal units at profile 1, gain 1
    gain_range: tuple = (0.4, 40.0)
    noise_floor: float = 0.3
    sample_rate: float = 200.0
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.profiles, dtype=float)
        if p.ndim != 2 or p.shape[1] != 8 or p.min() < 0 or p.max() > 1:
            raise DataError("profiles must be gestures x 8 values in [0, 1]")
        if len(self.band_weights) != len(p):
            raise DataError("one band weighting per gesture")
        for i in range(len(p)):
            for j in range(i + 1, len(p)):
                if np.linalg.norm(p[i] - p[j]) <= 0.2:
                    raise DataError(f"profiles {i} and {j} are too similar")

    @property
    def n_classes(self) -> int:
        return len(self.profiles) + 1


def _band_noise(rng, n: int, fs: float, weights) -> np.ndarray:
    from .encoders import band_sos

    out = np.zeros(n)
    for band, wgt in zip(((0.5, 50.0), (50.0, 100.0)), weights):
        if wgt == 0:
            continue
        x = sps.sosfilt(band_sos(band, fs), rng.standard_normal(n + 200))[200:]
        out += wgt * x / (np.std(x) + 1e-12)
    return out


def synth_emg(spec: SynthSpec) -> AnalogRecording:
    """Rest, then trials in seeded random class order, each followed by rest."""
    rng = np.random.default_rng([spec.seed, 37])
    fs = spec.sample_rate
    n_trial = int(round(spec.trial_duration * fs))
    n_rest = int(round(spec.rest_duration * fs))
    order = rng.permutation(np.repeat(np.arange(len(spec.profiles)), spec.trials_per_class))
    gains = np.geomspace(spec.gain_range[0], spec.gain_range[1], spec.trials_per_class)
    gain_of = {g: list(rng.permutation(gains)) for g in range(len(spec.profiles))}
    chunks, labels = [np.zeros((8, n_rest))], [np.zeros(n_rest, dtype=np.int64)]
    for g in order:
        gain = gain_of[g].pop()
        trial = np.stack([spec.profiles[g][ch] * _band_noise(rng, n_trial, fs, spec.band_weights[g])
                          for ch in range(8)])
        chunks += [spec.amplitude * gain * trial, np.zeros((8, n_rest))]
        labels += [np.full(n_trial, g + 1, dtype=np.int64), np.zeros(n_rest, dtype=np.int64)]
    samples = np.concatenate(chunks, axis=1)
    samples += spec.noise_floor * rng.standard_normal(samples.shape)
    return AnalogRecording(fs, [f"emg{ch}" for ch in range(8)], samples, np.concatenate(labels))


def prepare_corpus(recording: AnalogRecording, method: str = "adm", seed: int = 0,
                   adm: AdmParams | None = None, pfm: PfmParams | None = None,
                   bleed_filter: bool = True) -> list[LabeledWindow]:
    """segment -> bleed filter -> oversample -> encode, for one session."""
    windows = segment(recording, seed=seed)
    if bleed_filter:
        windows = filter_label_bleed(windows, recording)
    windows = oversample(windows, seed=seed)
    return encode_windows(recording, windows, method, adm, pfm)
