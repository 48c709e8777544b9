"""Experiments: IO curves, weight-unit calibration, the ablation ladder and
k-fold evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .datapipe import kfold, split
from .encoders import poisson_inputs
from .engine import mean_rate, run
from .learning import ClassMap, TraceParams, decide, pair_counts, train, window_seed
from .topology import NetworkConfig, build_network

ABLATIONS = {
    "Base": dict(adaptation=False, ei_balance=False, ff_inhibition=False),
    "+adapt": dict(adaptation=True, ei_balance=False, ff_inhibition=False),
    "+EI": dict(adaptation=False, ei_balance=True, ff_inhibition=False),
    "+FF": dict(adaptation=False, ei_balance=False, ff_inhibition=True),
    "Full": dict(adaptation=True, ei_balance=True, ff_inhibition=True),
}

DEFAULT_RATES = tuple(range(0, 8001, 500))
DEFAULT_WEIGHT_GRID = (300.0, 450.0, 600.0, 800.0, 1000.0, 1500.0, 2000.0)


@dataclass(frozen=True)
class AblationConfig:
    name: str
    adaptation: bool
    ei_balance: bool
    ff_inhibition: bool

    @classmethod
    def named(cls, name: str) -> "AblationConfig":
        try:
            return cls(name, **ABLATIONS[name])
        except KeyError:
            raise ValueError(f"unknown ablation {name!r}; choose from {list(ABLATIONS)}") from None

    def apply(self, config: NetworkConfig) -> NetworkConfig:
        return config.with_flags(adaptation=self.adaptation, ei_balance=self.ei_balance,
                                 ff_inhibition=self.ff_inhibition)


@dataclass
class IoCurve:
    name: str
    rates: np.ndarray  # input Hz
    output: np.ndarray  # mean E rate, Hz
    populations: dict = field(default_factory=dict)  # mean FF / I rates

    def r2(self) -> float:
        return linear_r2(self.rates, self.output)

    def monotone(self, tol: float = 0.02) -> bool:
        """Non-decreasing, allowing dips up to ``tol`` of the curve maximum."""
        return bool(np.all(np.diff(self.output) >= -tol * max(self.output.max(), 1e-12)))

    def at(self, rate: float) -> float:
        return float(self.output[int(np.flatnonzero(self.rates == rate)[0])])

    def to_csv(self) -> str:
        lines = ["input_hz,E_hz,FF_hz,I_hz"]
        for k, r in enumerate(self.rates):
            lines.append(f"{r:g},{self.output[k]:.6f},{self.populations['FF'][k]:.6f},"
                         f"{self.populations['I'][k]:.6f}")
        return "\n".join(lines) + "\n"


def linear_r2(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        return 0.0
    slope, icpt = np.polyfit(x, y, 1)
    return 1.0 - float(((y - (slope * x + icpt)) ** 2).sum()) / ss_tot


def io_curve(ablation: AblationConfig, config: NetworkConfig | None = None,
             rates=DEFAULT_RATES, duration: float = 1e6, seed: int = 0,
             discard: float = 0.2, dt: float = dyn.DT) -> IoCurve:
    """Mean E rate for independent Poisson drive of all inputs at each rate.

    Plastic weights stay at their initial values; the first ``discard`` fraction of
    each run is excluded.
    """
    cfg = ablation.apply(config or NetworkConfig())
    out, ff, inh = [], [], []
    window = (discard * duration, duration)
    for k, r in enumerate(rates):
        net = build_network(cfg)
        inputs = poisson_inputs(r, cfg.n_input, duration, seed=seed * 100003 + k)
        res = run(net, inputs, duration, dt, seed=[seed, k])
        out.append(mean_rate(res, "E", window).mean())
        ff.append(mean_rate(res, "FF", window).mean())
        inh.append(mean_rate(res, "I", window).mean())
    return IoCurve(ablation.name, np.asarray(rates, dtype=float), np.array(out),
                   {"FF": np.array(ff), "I": np.array(inh)})


def calibrate_weight_unit(config: NetworkConfig | None = None, grid=DEFAULT_WEIGHT_GRID,
                          rates=DEFAULT_RATES, duration: float = 1e6, seed: int = 0):
    """Weight unit maximising the linear-fit R² of the Full IO curve (ties: smaller).

    Returns (best value, {value: R²}).
    """
    config = config or NetworkConfig()
    scores = {}
    full = AblationConfig.named("Full")
    for iw in sorted(grid):
        cfg = NetworkConfig.from_dict({**config.to_dict(), "i_w_base": float(iw)})
        scores[float(iw)] = io_curve(full, cfg, rates, duration, seed).r2()
    best = max(scores, key=lambda k: (scores[k], -k))
    return best, scores


# ---------------------------------------------------------------------------
# classification


@dataclass
class CellResult:
    accuracy: float
    confusion: np.ndarray
    mean_weight: list
    mean_rate: float  # E population, Hz, over test windows


def score(network, test_set, class_map: ClassMap, seed: int) -> tuple[np.ndarray, float]:
    """Confusion matrix (rows = true class) and mean E rate (Hz) of frozen ``network``."""
    n = class_map.n_classes
    confusion = np.zeros((n, n), dtype=np.int64)
    total_e = 0
    for win in test_set:
        counts = pair_counts(network, win, class_map, seed=window_seed(seed, win))
        confusion[win.label, decide(counts)] += 1
        total_e += int(counts.sum())
    dur = sum(w.spikes.duration for w in test_set) * 1e-6
    return confusion, total_e / (network.config.n_exc * dur) if dur else 0.0


def run_cell(train_set, test_set, config: NetworkConfig, class_map: ClassMap, seed: int,
             epochs: int = 5, params: TraceParams = TraceParams()) -> CellResult:
    """Train on one split, freeze, and score the test windows."""
    net = build_network(config)
    tr = train(net, train_set, epochs, params, class_map, seed)
    confusion, rate = score(net, test_set, class_map, seed)
    acc = float(np.trace(confusion) / max(confusion.sum(), 1))
    return CellResult(acc, confusion, tr.mean_weight, rate)


def ablation_run(windows, config: NetworkConfig | None = None, names=tuple(ABLATIONS),
                 seeds=(0, 1, 2), epochs: int = 5, ratio: float = 0.8,
                 class_map: ClassMap | None = None, params: TraceParams = TraceParams()) -> dict:
    """Accuracy of each ablation on identical splits and seeds.

    Returns {name: {"accuracy": [per seed], "median": m, "spread": (min, max),
    "mean_weight": [per seed per epoch]}}.
    """
    config = config or NetworkConfig()
    class_map = class_map or ClassMap.default(n_exc=config.n_exc)
    splits = {s: split(windows, ratio, seed=s) for s in seeds}
    table = {}
    for name in names:
        abl = AblationConfig.named(name)
        accs, weights = [], []
        for s in seeds:
            cfg = abl.apply(NetworkConfig.from_dict({**config.to_dict(), "seed": s}))
            cell = run_cell(*splits[s], cfg, class_map, s, epochs, params)
            accs.append(cell.accuracy)
            weights.append(cell.mean_weight)
        table[name] = {"accuracy": accs, "median": float(np.median(accs)),
                       "spread": (min(accs), max(accs)), "mean_weight": weights}
    return table


def evaluate(windows, config: NetworkConfig | None = None, seeds=(0,), k: int = 3,
             epochs: int = 5, class_map: ClassMap | None = None,
             params: TraceParams = TraceParams()) -> dict:
    """k-fold metrics averaged over folds and seeds."""
    config = config or NetworkConfig()
    class_map = class_map or ClassMap.default(n_exc=config.n_exc)
    n = class_map.n_classes
    accs, rates = [], []
    confusion = np.zeros((n, n), dtype=np.int64)
    for s in seeds:
        cfg = NetworkConfig.from_dict({**config.to_dict(), "seed": s})
        for train_set, test_set in kfold(windows, k, seed=s):
            cell = run_cell(train_set, test_set, cfg, class_map, s, epochs, params)
            accs.append(cell.accuracy)
            rates.append(cell.mean_rate)
            confusion += cell.confusion
    support = confusion.sum(axis=1)
    recall = np.divide(np.diag(confusion), support, out=np.zeros(n), where=support > 0)
    return {"accuracy": float(np.mean(accs)), "accuracy_std": float(np.std(accs)),
            "fold_accuracy": accs, "per_class_recall": recall.tolist(),
            "confusion": confusion.tolist(), "mean_output_rate": float(np.mean(rates))}


def pool_sessions(*window_sets) -> list:
    """Concatenate windows of several sessions for pooled training/testing."""
    return [w for ws in window_sets for w in ws]
