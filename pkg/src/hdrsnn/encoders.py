"""Signal-to-spike conversion.

Two encoders turn sampled biosignals into spike trains:

* asynchronous delta modulation (ADM), emitting UP/DOWN events whenever the
  linearly interpolated signal moves one threshold away from a tracked
  reference;
* energy-based pulse-frequency modulation (PFM), band-passing the signal,
  rectifying it and driving a perfect integrator whose rate is proportional
  to the injected current.

Spike times are in microseconds throughout.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import signal as sps

from . import _backend


class EncodingError(ValueError):
    pass


@dataclass
class AnalogRecording:
    sample_rate: float
    channels: list[str]
    samples: np.ndarray  # (n_channels, n_samples)
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if not self.sample_rate > 0:
            raise EncodingError("sample_rate must be > 0")
        if self.samples.shape[0] != len(self.channels):
            raise EncodingError(
                f"{len(self.channels)} channel names for {self.samples.shape[0]} rows")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.samples.shape[1],):
                raise EncodingError("labels must have one entry per sample")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_us(self) -> float:
        return self.n_samples / self.sample_rate * 1e6

    def channel(self, idx: int) -> "AnalogRecording":
        return AnalogRecording(self.sample_rate, [self.channels[idx]],
                               self.samples[idx:idx + 1].copy(), self.labels)

    def slice(self, start: int, stop: int) -> "AnalogRecording":
        labels = None if self.labels is None else self.labels[start:stop]
        return AnalogRecording(self.sample_rate, list(self.channels),
                               self.samples[:, start:stop].copy(), labels)

    @classmethod
    def from_csv(cls, path) -> "AnalogRecording":
        """Read ``t,<ch1>,...,<chN>[,label]`` (time in seconds)."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [r for r in reader if r]
        if not header or header[0] != "t":
            raise EncodingError("recording CSV must start with a 't' column")
        has_label = header[-1] == "label"
        names = header[1:-1] if has_label else header[1:]
        if not rows:
            raise EncodingError("recording CSV has no samples")
        t = np.array([float(r[0]) for r in rows])
        data = np.array([[float(x) for x in r[1:1 + len(names)]] for r in rows]).T
        labels = np.array([int(r[-1]) for r in rows]) if has_label else None
        if len(t) > 1:
            rate = (len(t) - 1) / (t[-1] - t[0])
        else:
            raise EncodingError("need at least two samples to infer the sample rate")
        return cls(round(rate, 6), names, data, labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["t", *self.channels] + (["label"] if self.labels is not None else [])
            w.writerow(header)
            for i in range(self.n_samples):
                row = [f"{i / self.sample_rate:.6f}"]
                row += [repr(float(v)) for v in self.samples[:, i]]
                if self.labels is not None:
                    row.append(str(int(self.labels[i])))
                w.writerow(row)


@dataclass
class SpikeTrain:
    channels: list[str]
    times: np.ndarray  # µs, sorted
    chan: np.ndarray  # channel index per event
    duration: float  # µs

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.chan = np.asarray(self.chan, dtype=np.int32)
        if self.times.shape != self.chan.shape:
            raise EncodingError("times and chan must have equal length")
        if self.times.size:
            order = np.lexsort((self.chan, self.times))
            if not np.array_equal(order, np.arange(order.size)):
                self.times, self.chan = self.times[order], self.chan[order]
            if self.times[0] < 0 or self.times[-1] > self.duration:
                raise EncodingError("spike times must lie within [0, duration]")
            if self.chan.min() < 0 or self.chan.max() >= len(self.channels):
                raise EncodingError("channel index out of range")

    @classmethod
    def empty(cls, channels, duration) -> "SpikeTrain":
        return cls(list(channels), np.zeros(0), np.zeros(0, dtype=np.int32), float(duration))

    def __len__(self) -> int:
        return self.times.size

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def counts(self) -> np.ndarray:
        return np.bincount(self.chan, minlength=self.n_channels)

    def channel_times(self, idx: int) -> np.ndarray:
        return self.times[self.chan == idx]

    def window(self, t0: float, t1: float) -> "SpikeTrain":
        """Events in [t0, t1), shifted so the window starts at zero."""
        lo, hi = np.searchsorted(self.times, [t0, t1], side="left")
        return SpikeTrain(list(self.channels), self.times[lo:hi] - t0,
                          self.chan[lo:hi].copy(), float(t1 - t0))

    def binned(self, dt_us: float, n_bins: int) -> np.ndarray:
        """Per-step event counts, shape (n_bins, n_channels)."""
        idx = np.floor(self.times / dt_us).astype(np.int64)
        np.minimum(idx, n_bins - 1, out=idx)
        flat = np.bincount(idx * self.n_channels + self.chan,
                           minlength=n_bins * self.n_channels)
        return flat.reshape(n_bins, self.n_channels).astype(np.int32)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return (self.channels == other.channels and self.duration == other.duration
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.chan, other.chan))

    @staticmethod
    def merge(trains: list["SpikeTrain"]) -> "SpikeTrain":
        """Stack channels of trains sharing a duration."""
        names, times, chans, offset = [], [], [], 0
        for tr in trains:
            names += tr.channels
            times.append(tr.times)
            chans.append(tr.chan + offset)
            offset += tr.n_channels
        duration = max((tr.duration for tr in trains), default=0.0)
        return SpikeTrain(names, np.concatenate(times) if times else np.zeros(0),
                          np.concatenate(chans) if chans else np.zeros(0, np.int32), duration)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("time_us,channel\n")
        for t, c in zip(self.times, self.chan):
            buf.write(f"{t:.4f},{self.channels[c]}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, channels=None, duration=None) -> "SpikeTrain":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = [(float(r["time_us"]), r["channel"]) for r in reader]
        if channels is None:
            channels = sorted({c for _, c in rows})
        lookup = {c: i for i, c in enumerate(channels)}
        times = np.array([t for t, _ in rows])
        chan = np.array([lookup[c] for _, c in rows], dtype=np.int32)
        if duration is None:
            duration = float(times.max()) if times.size else 0.0
        return cls(list(channels), times, chan, float(duration))


# ---------------------------------------------------------------------------
# Asynchronous delta modulation


@dataclass(frozen=True)
class AdmParams:
    threshold: float = 0.8  # signal units
    refractory: float = 10.0  # µs
    interpolation_factor: int = 3500

    def __post_init__(self):
        if not self.threshold > 0:
            raise EncodingError("ADM threshold must be > 0")
        if self.refractory < 0:
            raise EncodingError("ADM refractory must be >= 0")
        if int(self.interpolation_factor) != self.interpolation_factor or self.interpolation_factor < 1:
            raise EncodingError("interpolation_factor must be an integer >= 1")

    def block_points(self, sample_rate: float) -> int:
        """Grid points an event blocks, counting itself."""
        span = round(self.refractory * 1e-6 * sample_rate * self.interpolation_factor, 9)
        return max(1, math.ceil(span))


def _single(signal) -> tuple[np.ndarray, float, str]:
    if isinstance(signal, AnalogRecording):
        if len(signal.channels) != 1:
            raise EncodingError("expected a single-channel recording")
        return signal.samples[0], signal.sample_rate, signal.channels[0]
    raise TypeError("signal must be an AnalogRecording")


def adm_grid_events(x: np.ndarray, sample_rate: float, params: AdmParams):
    """Grid indices and directions (+1 UP, -1 DOWN) of the ADM events of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise EncodingError("cannot encode an empty signal")
    u = x / params.threshold
    return _backend.adm_points(np.ascontiguousarray(u), int(params.interpolation_factor),
                               params.block_points(sample_rate))


def adm_encode(signal: AnalogRecording, params: AdmParams) -> SpikeTrain:
    x, fs, name = _single(signal)
    g, d = adm_grid_events(x, fs, params)
    times = g * 1e6 / (fs * params.interpolation_factor)
    chan = np.where(d > 0, 0, 1).astype(np.int32)
    return SpikeTrain([f"{name}_UP", f"{name}_DOWN"], times, chan, x.size / fs * 1e6)


def adm_encode_recording(rec: AnalogRecording, params: AdmParams) -> SpikeTrain:
    """Encode every channel; output channels are interleaved (UP, DOWN) per electrode."""
    return SpikeTrain.merge([adm_encode(rec.channel(i), params) for i in range(len(rec.channels))])


def _grid_index(spikes: SpikeTrain, sample_rate: float, params: AdmParams) -> np.ndarray:
    return np.rint(spikes.times * (sample_rate * params.interpolation_factor) / 1e6).astype(np.int64)


def _steps(spikes: SpikeTrain) -> np.ndarray:
    up = [i for i, c in enumerate(spikes.channels) if c.endswith("UP")]
    down = [i for i, c in enumerate(spikes.channels) if c.endswith("DOWN")]
    if len(up) != 1 or len(down) != 1:
        raise EncodingError("ADM reconstruction needs exactly one UP and one DOWN channel")
    return np.where(spikes.chan == up[0], 1, np.where(spikes.chan == down[0], -1, 0))


def adm_reconstruct(spikes: SpikeTrain, params: AdmParams, initial: float,
                    sample_rate: float, n_samples: int | None = None) -> AnalogRecording:
    """Staircase reconstruction on the interpolated grid of the original signal."""
    L = params.interpolation_factor
    if n_samples is None:
        n_samples = max(1, round(spikes.duration * sample_rate / 1e6))
    n_points = (n_samples - 1) * L + 1
    level = np.zeros(n_points)
    if len(spikes):
        np.add.at(level, _grid_index(spikes, sample_rate, params), _steps(spikes))
    out = initial + params.threshold * np.cumsum(level)
    return AnalogRecording(sample_rate * L, ["reconstruction"], out[None, :])


def adm_reconstruct_at_samples(spikes: SpikeTrain, params: AdmParams, initial: float,
                               sample_rate: float, n_samples: int) -> np.ndarray:
    """Staircase value at each original sample instant (no full grid materialised)."""
    g = _grid_index(spikes, sample_rate, params)
    cum = np.concatenate([[0], np.cumsum(_steps(spikes))])
    at = np.arange(n_samples, dtype=np.int64) * params.interpolation_factor
    return initial + params.threshold * cum[np.searchsorted(g, at, side="right")]


def adm_refractory_mask(spikes: SpikeTrain, params: AdmParams, sample_rate: float,
                        n_points: int) -> np.ndarray:
    """True at grid points blocked by a preceding event's refractory period."""
    mask = np.zeros(n_points, dtype=bool)
    nb = params.block_points(sample_rate)
    for g in _grid_index(spikes, sample_rate, params):
        mask[g + 1:g + nb] = True
    return mask


def adm_grid_search(signal: AnalogRecording, thresholds, refractories, interps) -> AdmParams:
    """Pick the ADM parameters minimising reconstruction RMSE at the sample instants.

    Ties go to fewer spikes, then to candidate order (thresholds outermost).
    """
    x, fs, _ = _single(signal)
    candidates = [AdmParams(t, r, int(i))
                  for t, r, i in itertools.product(thresholds, refractories, interps)]
    if not candidates:
        raise EncodingError("empty candidate grid")
    best, best_key = None, None
    for p in candidates:
        sp = adm_encode(signal, p)
        rec = adm_reconstruct_at_samples(sp, p, x[0], fs, x.size)
        rmse = float(np.sqrt(np.mean((rec - x) ** 2)))
        key = (rmse, len(sp))
        if best is None or _better(key, best_key):
            best, best_key = p, key
    return best


def _better(key, incumbent) -> bool:
    (r, n), (r0, n0) = key, incumbent
    if math.isclose(r, r0, rel_tol=1e-12, abs_tol=1e-15):
        return n < n0
    return r < r0


# ---------------------------------------------------------------------------
# Pulse-frequency modulation


@dataclass(frozen=True)
class PfmParams:
    bands: tuple = ((0.5, 50.0), (50.0, 100.0))  # Hz
    i_max: float = 8.0  # nA
    rate_max: float = 4000.0  # Hz at i_max
    scale_range: tuple | None = None  # signal units, set by pfm_calibrate
    percentile: float = 99.0
    filter_order: int = 4

    def __post_init__(self):
        bands = tuple((float(lo), float(hi)) for lo, hi in self.bands)
        object.__setattr__(self, "bands", bands)
        for lo, hi in bands:
            if not 0 <= lo < hi <= 100:
                raise EncodingError(f"band ({lo}, {hi}) must satisfy 0 <= lo < hi <= 100")
        edges = sorted(bands)
        if any(a[1] > b[0] for a, b in zip(edges, edges[1:])):
            raise EncodingError("PFM bands overlap")
        if not (self.i_max > 0 and self.rate_max > 0):
            raise EncodingError("i_max and rate_max must be > 0")
        if self.scale_range is not None:
            lo, hi = self.scale_range
            object.__setattr__(self, "scale_range", (float(lo), float(hi)))

    @property
    def spike_threshold(self) -> float:
        """Integrated charge per spike (nA·s)."""
        return self.i_max / self.rate_max


def band_sos(band, sample_rate: float, order: int = 4) -> np.ndarray:
    """Butterworth second-order sections for one band.

    Edges at or beyond Nyquist degrade to a high-pass, a zero lower edge to a low-pass.
    """
    lo, hi = band
    nyq = sample_rate / 2
    if hi >= nyq and lo <= 0:
        raise EncodingError(f"band {band} covers the whole spectrum at {sample_rate} Hz")
    if hi >= nyq:
        return sps.butter(order, lo, btype="highpass", fs=sample_rate, output="sos")
    if lo <= 0:
        return sps.butter(order, hi, btype="lowpass", fs=sample_rate, output="sos")
    return sps.butter(order, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")


def band_envelopes(x: np.ndarray, sample_rate: float, params: PfmParams) -> np.ndarray:
    """Full-wave rectified band outputs, shape (n_bands, n_samples)."""
    x = np.asarray(x, dtype=np.float64)
    return np.stack([np.abs(sps.sosfilt(band_sos(b, sample_rate, params.filter_order), x))
                     for b in params.bands])


def scale_range_from(amplitudes, percentile: float = 99.0) -> tuple[float, float]:
    p = float(np.percentile(np.abs(np.ravel(amplitudes)), percentile))
    if not p > 0:
        raise EncodingError("degenerate scaling range: recording is silent")
    return (0.0, p)


def pfm_calibrate(recording: AnalogRecording, params: PfmParams) -> PfmParams:
    """Shared scaling range for one session: percentile of pooled band envelopes."""
    pooled = [band_envelopes(row, recording.sample_rate, params) for row in recording.samples]
    return replace(params, scale_range=scale_range_from(pooled, params.percentile))


def amplitude_to_current(a: np.ndarray, params: PfmParams) -> np.ndarray:
    lo, hi = params.scale_range
    return np.clip((a - lo) / (hi - lo), 0.0, 1.0) * params.i_max


def pfm_integrate(current: np.ndarray, sample_rate: float, params: PfmParams) -> np.ndarray:
    """Spike times (µs) of a perfect integrator driven by a sample-and-hold current.

    Threshold crossings are located exactly within each sample interval; reset
    subtracts the threshold so the rate is exactly ``I * rate_max / i_max``.
    """
    current = np.asarray(current, dtype=np.float64)
    theta = params.spike_threshold
    dt = 1.0 / sample_rate
    charge = np.concatenate([[0.0], np.cumsum(current * dt)]) / theta
    n_fired = np.floor(charge).astype(np.int64)
    per_step = np.diff(n_fired)
    if per_step.sum() == 0:
        return np.zeros(0)
    steps = np.repeat(np.arange(current.size), per_step)
    m = np.arange(1, n_fired[-1] + 1)
    frac = (m - charge[steps]) / (current[steps] * dt / theta)
    return (steps + np.clip(frac, 0.0, 1.0)) * dt * 1e6


def pfm_encode(signal: AnalogRecording, params: PfmParams) -> SpikeTrain:
    if params.scale_range is None:
        raise EncodingError("PFM parameters are uncalibrated; run pfm_calibrate first")
    x, fs, name = _single(signal)
    env = band_envelopes(x, fs, params)
    times, chans = [], []
    for k, a in enumerate(env):
        t = pfm_integrate(amplitude_to_current(a, params), fs, params)
        times.append(t)
        chans.append(np.full(t.size, k, dtype=np.int32))
    names = [f"{name}_B{k}" for k in range(len(params.bands))]
    return SpikeTrain(names, np.concatenate(times), np.concatenate(chans), x.size / fs * 1e6)


def pfm_encode_recording(rec: AnalogRecording, params: PfmParams) -> SpikeTrain:
    """Encode every channel; output channels are interleaved bands per electrode."""
    return SpikeTrain.merge([pfm_encode(rec.channel(i), params) for i in range(len(rec.channels))])


# ---------------------------------------------------------------------------
# Poisson sources


def poisson_train(rate: float, duration: float, seed, channel: str = "poisson") -> SpikeTrain:
    """Homogeneous Poisson train; ``duration`` in µs, fully determined by ``seed``."""
    if rate < 0:
        raise EncodingError("rate must be >= 0")
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate * duration * 1e-6) if rate > 0 else 0
    times = np.sort(rng.uniform(0.0, duration, n))
    return SpikeTrain([channel], times, np.zeros(n, dtype=np.int32), float(duration))


def poisson_inputs(rate: float, n_channels: int, duration: float, seed: int) -> SpikeTrain:
    """Independent Poisson trains, one per channel."""
    return SpikeTrain.merge([poisson_train(rate, duration, [seed, ch], f"in{ch}")
                             for ch in range(n_channels)])
