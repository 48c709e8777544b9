"""Delta-rule training of the Inp->E weights and pair-vote prediction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .engine import Plasticity, run
from .topology import Network


@dataclass(frozen=True)
class TraceParams:
    tau_x: float = 0.05  # s
    increment: float = 0.04  # readout trace units per spike
    pre_increment: float = 0.0025  # input trace units per spike
    teacher_value: float = 0.1
    alpha: float = 5e-4
    w_max: float = 2.0

    def __post_init__(self):
        if not (self.tau_x > 0 and self.alpha > 0 and self.teacher_value > 0):
            raise ValueError("tau_x, alpha and teacher_value must be > 0")


@dataclass(frozen=True)
class ClassMap:
    pairs: tuple  # class id -> (neuron a, neuron b)
    names: tuple = ()

    def __post_init__(self):
        flat = [n for p in self.pairs for n in p]
        if len(set(flat)) != len(flat):
            raise ValueError("class pairs must be disjoint")
        if any(len(p) != 2 for p in self.pairs):
            raise ValueError("each class maps to exactly two output neurons")

    @property
    def n_classes(self) -> int:
        return len(self.pairs)

    @classmethod
    def default(cls, n_classes: int = 4, n_exc: int = 8) -> "ClassMap":
        if 2 * n_classes > n_exc:
            raise ValueError(f"{n_classes} classes need {2 * n_classes} output neurons")
        names = ("rest", "rock", "paper", "scissors") if n_classes == 4 else ()
        return cls(tuple((2 * c, 2 * c + 1) for c in range(n_classes)), names)


def update_traces(traces: np.ndarray, spikes: np.ndarray, dt: float, params: TraceParams) -> np.ndarray:
    """Exponential decay over ``dt`` plus ``increment`` per spike."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    return traces * math.exp(-dt / params.tau_x) + params.increment * np.asarray(spikes, dtype=float)


def delta_update(w: np.ndarray, x: np.ndarray, y: np.ndarray, teacher: np.ndarray,
                 params: TraceParams) -> np.ndarray:
    """``w[i, j] += alpha * (T[j] - y[j]) * x[i]``, clipped to [0, w_max].

    ``w`` is indexed (presynaptic input, postsynaptic readout neuron).
    """
    w = np.asarray(w, dtype=np.float64)
    x, y, teacher = (np.asarray(a, dtype=np.float64) for a in (x, y, teacher))
    if w.shape != (x.size, y.size) or teacher.shape != y.shape:
        raise ValueError(f"shape mismatch: w {w.shape}, x {x.shape}, y {y.shape}, T {teacher.shape}")
    return np.clip(w + params.alpha * (teacher - y)[None, :] * x[:, None], 0.0, params.w_max)


def teacher_vector(label: int, class_map: ClassMap, n_exc: int, params: TraceParams) -> np.ndarray:
    if not 0 <= label < class_map.n_classes:
        raise ValueError(f"label {label} outside the class map")
    t = np.zeros(n_exc)
    t[list(class_map.pairs[label])] = params.teacher_value
    return t


@dataclass
class TrainResult:
    weights: np.ndarray
    mean_weight: list = field(default_factory=list)  # per epoch, index 0 = initial
    snapshots: list = field(default_factory=list)  # weight matrix after each epoch


def _window_seed(seed, *parts) -> list:
    return [int(s) for s in np.atleast_1d(seed)] + [int(p) for p in parts]


def train(network: Network, dataset, epochs: int = 5, params: TraceParams = TraceParams(),
          class_map: ClassMap | None = None, seed: int = 0, dt: float = dyn.DT) -> TrainResult:
    """Online delta-rule training over ``dataset`` (a list of LabeledWindow).

    Weights carry over between windows; presentation order is reshuffled every
    epoch from ``seed``. ``network`` is modified in place.
    """
    if not dataset:
        raise ValueError("empty training set")
    n_exc = network.config.n_exc
    class_map = class_map or ClassMap.default(n_exc=n_exc)
    for win in dataset:
        if not 0 <= win.label < class_map.n_classes:
            raise ValueError(f"window label {win.label} outside the class map")
    plast = dict(tau_x=params.tau_x, increment=params.increment,
                 pre_increment=params.pre_increment, alpha=params.alpha,
                 w_max=params.w_max)
    result = TrainResult(network.plastic_weights)
    result.mean_weight.append(float(result.weights.mean()))
    for epoch in range(epochs):
        order = np.random.default_rng(_window_seed(seed, 11, epoch)).permutation(len(dataset))
        for pos in order:
            win = dataset[pos]
            teacher = teacher_vector(win.label, class_map, n_exc, params)
            run(network, win.spikes, win.spikes.duration, dt,
                seed=_window_seed(seed, 13, epoch, pos), plasticity=Plasticity(teacher, **plast))
        w = network.plastic_weights
        result.snapshots.append(w)
        result.mean_weight.append(float(w.mean()))
    result.weights = network.plastic_weights
    return result


def pair_counts(network: Network, window, class_map: ClassMap, seed=0, dt: float = dyn.DT) -> np.ndarray:
    res = run(network, window.spikes, window.spikes.duration, dt, seed=seed)
    counts = res.counts("E")
    return np.array([counts[a] + counts[b] for a, b in class_map.pairs])


def decide(pair_totals) -> int:
    """Class with the largest pair count; ties go to the lowest class index."""
    return int(np.argmax(np.asarray(pair_totals)))


def predict(network: Network, weights: np.ndarray, window, class_map: ClassMap | None = None,
            seed=0, dt: float = dyn.DT) -> int:
    class_map = class_map or ClassMap.default(n_exc=network.config.n_exc)
    net = network.copy()
    net.set_plastic_weights(weights)
    return decide(pair_counts(net, window, class_map, seed, dt))


def window_seed(seed: int, window) -> list:
    """Noise seed derived from the window's identity, so evaluation order does not matter."""
    return _window_seed(seed, 17, *window.source_key())


def save_weights(path, weights: np.ndarray, config_hash: str, seed: int, epochs: int, **extra) -> None:
    doc = {"shape": list(weights.shape), "weights": np.asarray(weights).ravel().tolist(),
           "config_hash": config_hash, "seed": seed, "epochs": epochs, **extra}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_weights(path) -> tuple[np.ndarray, dict]:
    doc = json.loads(Path(path).read_text())
    w = np.asarray(doc.pop("weights"), dtype=np.float64).reshape(doc["shape"])
    return w, doc
