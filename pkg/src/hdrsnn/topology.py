"""Four-population network: Input relays, feed-forward inhibition (FF),
excitatory readout (E) and recurrent inhibition (I).

Connectivity (all weights dimensionless, scaled by ``i_w_base`` pA):

    Inp -> FF   one-to-one      AMPA    w_inp_ff
    Inp -> E    all-to-all      NMDA    plastic matrix
    FF  -> E    all-to-all      GABA_A  w_ff_e     (ff_inhibition)
    E   -> I    all-to-all      AMPA    w_e_i      (ei_balance)
    I   -> E    all-to-all      GABA_B  w_i_e      (ei_balance)
    I   -> I    all-but-self    GABA_A  w_i_i      (ei_balance)

Every FF, E and I neuron also receives one AMPA and one GABA_B Poisson noise source.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np

from . import dynamics as dyn
from .dynamics import NMDA, SYNAPSE_CLASSES


class ConfigError(ValueError):
    pass


POPULATIONS = ("Inp", "FF", "E", "I")


@dataclass
class NetworkConfig:
    n_input: int = 16
    n_ff: int = 16
    n_exc: int = 8
    n_inh: int = 4
    w_inp_ff: float = 0.5
    w_ff_e: float = 3.8
    w_i_e: float = 3.0
    w_e_i: float = 1.7
    w_i_i: float = 0.5
    w_inp_e: list | None = None  # n_input x n_exc; drawn from w_init_range when None
    w_init_range: tuple = (0.3, 0.7)
    w_max: float = 2.0
    adaptation: bool = True
    ei_balance: bool = True
    ff_inhibition: bool = True
    noise_rate: float = 40.0
    noise_weight: float = 1.0
    seed: int = 0
    i_w_base: float = dyn.I_W_BASE
    i_ahp_unit: float = dyn.I_AHP_UNIT
    synapses: dict = field(default_factory=dict)  # class tag -> {"i_tau":..., "i_gain":...}
    neuron: dict = field(default_factory=dict)  # NeuronParams overrides, all populations
    refractory: dict = field(default_factory=lambda: {"E": 3e-3, "FF": 1e-3, "I": 1e-3})

    def __post_init__(self):
        for name in ("w_inp_ff", "w_ff_e", "w_i_e", "w_e_i", "w_i_i", "noise_weight", "noise_rate"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if min(self.n_input, self.n_ff, self.n_exc, self.n_inh) < 1:
            raise ConfigError("population sizes must be >= 1")
        if self.n_ff != self.n_input:
            raise ConfigError("one-to-one Inp->FF needs n_ff == n_input")
        self.w_init_range = tuple(self.w_init_range)
        if self.w_inp_e is not None:
            w = np.asarray(self.w_inp_e, dtype=np.float64)
            if w.shape != (self.n_input, self.n_exc):
                raise ConfigError(f"w_inp_e must be {self.n_input}x{self.n_exc}, got {w.shape}")
            if w.min() < 0 or w.max() > self.w_max:
                raise ConfigError("plastic weights must lie in [0, w_max]")
        for tag in self.synapses:
            if tag not in SYNAPSE_CLASSES:
                raise ConfigError(f"unknown synapse class {tag!r}")

    @property
    def flags(self) -> dict:
        return {"adaptation": self.adaptation, "ei_balance": self.ei_balance,
                "ff_inhibition": self.ff_inhibition}

    def with_flags(self, **flags) -> "NetworkConfig":
        d = self.to_dict()
        d.update(flags)
        return NetworkConfig.from_dict(d)

    def initial_weights(self) -> np.ndarray:
        if self.w_inp_e is not None:
            return np.array(self.w_inp_e, dtype=np.float64)
        rng = np.random.default_rng([self.seed, 7])
        lo, hi = self.w_init_range
        return rng.uniform(lo, hi, size=(self.n_input, self.n_exc))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["w_init_range"] = list(self.w_init_range)
        if self.w_inp_e is not None:
            d["w_inp_e"] = np.asarray(self.w_inp_e).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetworkConfig":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("w_inp_e", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


class Edge(NamedTuple):
    pre: tuple  # (population, index)
    post: tuple
    weight: float
    syn_class: str
    plastic: bool


class NoiseSource(NamedTuple):
    source: int
    target: tuple  # (population, index)
    syn_class: str
    rate: float
    weight: float


@dataclass
class Network:
    """Built network: edge table, per-population parameters and dense kernel matrices."""

    config: NetworkConfig
    edges: list
    neuron_params: dict  # population -> NeuronParams
    synapse_params: dict  # class tag -> SynapseParams
    noise: list
    w_ext: np.ndarray  # (4, n_sources, n_neurons); sources = input relays then noise
    w_rec: np.ndarray  # (4, n_neurons, n_neurons)
    offsets: dict  # population -> first dynamic-neuron index

    @property
    def n_neurons(self) -> int:
        return self.w_rec.shape[1]

    @property
    def n_sources(self) -> int:
        return self.w_ext.shape[1]

    def sizes(self) -> dict:
        c = self.config
        return {"Inp": c.n_input, "FF": c.n_ff, "E": c.n_exc, "I": c.n_inh}

    def index(self, pop: str, i: int) -> int:
        return self.offsets[pop] + i

    def population_slice(self, pop: str) -> slice:
        o = self.offsets[pop]
        return slice(o, o + self.sizes()[pop])

    @property
    def plastic_weights(self) -> np.ndarray:
        c = self.config
        e = self.population_slice("E")
        return self.w_ext[NMDA, :c.n_input, e].copy()

    def set_plastic_weights(self, w: np.ndarray) -> None:
        c = self.config
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (c.n_input, c.n_exc):
            raise ConfigError(f"plastic matrix must be {c.n_input}x{c.n_exc}")
        self.w_ext[NMDA, :c.n_input, self.population_slice("E")] = w

    def copy(self) -> "Network":
        return Network(self.config, list(self.edges), dict(self.neuron_params),
                       dict(self.synapse_params), list(self.noise), self.w_ext.copy(),
                       self.w_rec.copy(), dict(self.offsets))


def synapse_params(config: NetworkConfig) -> dict:
    out = dyn.default_synapses()
    for tag, over in config.synapses.items():
        base = out[tag]
        out[tag] = dyn.SynapseParams(tag, over.get("i_tau", base.i_tau),
                                     over.get("i_gain", base.i_gain),
                                     over.get("c_syn", base.c_syn), base.excitatory)
    return out


def population_params(config: NetworkConfig) -> dict:
    common = dict(config.neuron)
    common.setdefault("i_ahp_unit", config.i_ahp_unit)
    common.pop("refractory", None)
    common.pop("adapt_enabled", None)
    return {
        "FF": dyn.NeuronParams(refractory=config.refractory["FF"], adapt_enabled=False, **common),
        "E": dyn.NeuronParams(refractory=config.refractory["E"],
                              adapt_enabled=config.adaptation, **common),
        "I": dyn.NeuronParams(refractory=config.refractory["I"], adapt_enabled=False, **common),
    }


def build_edges(config: NetworkConfig, w_plastic: np.ndarray) -> list:
    c = config
    edges = [Edge(("Inp", i), ("FF", i), c.w_inp_ff, "AMPA", False) for i in range(c.n_input)]
    edges += [Edge(("Inp", i), ("E", j), float(w_plastic[i, j]), "NMDA", True)
              for i in range(c.n_input) for j in range(c.n_exc)]
    if c.ff_inhibition:
        edges += [Edge(("FF", i), ("E", j), c.w_ff_e, "GABA_A", False)
                  for i in range(c.n_ff) for j in range(c.n_exc)]
    if c.ei_balance:
        edges += [Edge(("E", i), ("I", j), c.w_e_i, "AMPA", False)
                  for i in range(c.n_exc) for j in range(c.n_inh)]
        edges += [Edge(("I", i), ("E", j), c.w_i_e, "GABA_B", False)
                  for i in range(c.n_inh) for j in range(c.n_exc)]
        edges += [Edge(("I", i), ("I", j), c.w_i_i, "GABA_A", False)
                  for i in range(c.n_inh) for j in range(c.n_inh) if i != j]
    return edges


def expected_edge_count(config: NetworkConfig) -> int:
    c = config
    n = c.n_input + c.n_input * c.n_exc
    if c.ff_inhibition:
        n += c.n_ff * c.n_exc
    if c.ei_balance:
        n += 2 * c.n_exc * c.n_inh + c.n_inh * (c.n_inh - 1)
    return n


def attach_noise(config: NetworkConfig) -> list:
    """Two independent noise sources (AMPA and GABA_B) per FF, E and I neuron."""
    out = []
    src = config.n_input
    for pop, n in (("FF", config.n_ff), ("E", config.n_exc), ("I", config.n_inh)):
        for i in range(n):
            for cls in ("AMPA", "GABA_B"):
                out.append(NoiseSource(src, (pop, i), cls, config.noise_rate, config.noise_weight))
                src += 1
    return out


def noise_counts(noise: list, n_steps: int, dt: float, seed) -> np.ndarray:
    """Binned noise spikes, shape (n_steps, len(noise)); one seeded stream per source."""
    out = np.zeros((n_steps, len(noise)), dtype=np.int32)
    for k, ns in enumerate(noise):
        if ns.rate > 0:
            rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), 1000 + k])
            out[:, k] = rng.poisson(ns.rate * dt, size=n_steps)
    return out


def build_network(config: NetworkConfig) -> Network:
    c = config
    sizes = {"FF": c.n_ff, "E": c.n_exc, "I": c.n_inh}
    offsets = {"FF": 0, "E": c.n_ff, "I": c.n_ff + c.n_exc}
    n_neu = sum(sizes.values())
    edges = build_edges(c, c.initial_weights())
    noise = attach_noise(c)
    n_src = c.n_input + len(noise)

    w_ext = np.zeros((4, n_src, n_neu))
    w_rec = np.zeros((4, n_neu, n_neu))
    for e in edges:
        cls = SYNAPSE_CLASSES.index(e.syn_class)
        post = offsets[e.post[0]] + e.post[1]
        if e.pre[0] == "Inp":
            w_ext[cls, e.pre[1], post] = e.weight
        else:
            w_rec[cls, offsets[e.pre[0]] + e.pre[1], post] = e.weight
    for ns in noise:
        cls = SYNAPSE_CLASSES.index(ns.syn_class)
        w_ext[cls, ns.source, offsets[ns.target[0]] + ns.target[1]] = ns.weight

    return Network(c, edges, population_params(c), synapse_params(c), noise,
                   w_ext, w_rec, offsets)
