"""Clock-driven simulation of a built network.

Each step: (1) external input and noise events are binned into per-source
counts; (2) synapses decay and receive the spikes emitted at the previous
step; (3) neurons integrate; (4) fired neurons are buffered for delivery at
the next step. Input-population neurons are relays, so an input event at
step k reaches its targets at step k + 1.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from . import dynamics as dyn
from .encoders import SpikeTrain
from .topology import Network, noise_counts

MAX_PROBES = 8


class ShapeError(ValueError):
    pass


@dataclass
class Plasticity:
    """Online delta-rule settings handed to the kernel."""

    teacher: np.ndarray  # one target per E neuron
    tau_x: float = 0.05
    increment: float = 0.04  # readout (post) trace per spike
    pre_increment: float = 0.0025  # input (pre) trace per spike
    alpha: float = 5e-4
    w_max: float = 2.0


@dataclass
class SimulationResult:
    spikes: dict  # population -> SpikeTrain (channels are neuron names)
    raster: np.ndarray  # (n_steps, n_neurons) uint8
    offsets: dict
    sizes: dict
    dt: float
    duration: float  # µs
    probes: list = field(default_factory=list)  # dynamic-neuron indices
    probe_mem: np.ndarray | None = None
    probe_ahp: np.ndarray | None = None
    wall_time: float = 0.0
    backend: str = ""

    def counts(self, population: str, t0: float = 0.0, t1: float | None = None) -> np.ndarray:
        """Spike count per neuron of ``population`` within [t0, t1) µs."""
        dt_us = self.dt * 1e6
        k0 = int(math.ceil(t0 / dt_us - 1e-9))
        k1 = self.raster.shape[0] if t1 is None else int(math.ceil(t1 / dt_us - 1e-9))
        o = self.offsets[population]
        return self.raster[k0:k1, o:o + self.sizes[population]].sum(axis=0, dtype=np.int64)

    def traces_csv(self, path=None) -> str:
        lines = ["time_us,neuron,i_mem_pA,i_ahp_pA"]
        if self.probe_mem is not None:
            dt_us = self.dt * 1e6
            for k in range(self.probe_mem.shape[0]):
                for p, idx in enumerate(self.probes):
                    lines.append(f"{k * dt_us:.1f},{idx},{self.probe_mem[k, p]!r},"
                                 f"{self.probe_ahp[k, p]!r}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _kernel_args(net: Network, dt: float):
    syn = net.synapse_params
    tags = ("AMPA", "NMDA", "GABA_A", "GABA_B")
    syn_decay = np.array([math.exp(-dt / syn[t].tau) for t in tags])
    syn_scale = np.array([net.config.i_w_base * syn[t].i_gain / syn[t].i_tau for t in tags])
    n = net.n_neurons
    per = {k: np.zeros(n) for k in ("mem_decay", "mem_gain", "i_thr", "i_reset",
                                    "i_const", "ahp_decay", "ahp_inc")}
    per["tau_mem"] = np.zeros(n)
    per["refr"] = np.zeros(n)
    for pop in ("FF", "E", "I"):
        p = net.neuron_params[pop]
        sl = net.population_slice(pop)
        per["mem_decay"][sl] = math.exp(-dt / p.tau_mem)
        per["mem_gain"][sl] = p.i_gain / p.i_leak
        per["i_thr"][sl] = p.i_thr
        per["i_reset"][sl] = p.i_reset
        per["i_const"][sl] = p.i_const
        per["ahp_decay"][sl] = math.exp(-dt / p.tau_ahp)
        per["ahp_inc"][sl] = p.ahp_increment
        per["tau_mem"][sl] = p.tau_mem
        per["refr"][sl] = p.refractory
    return syn_decay, syn_scale, per


def external_counts(net: Network, inputs: SpikeTrain, n_steps: int, dt: float, seed) -> np.ndarray:
    n_in = net.config.n_input
    if inputs.n_channels != n_in:
        raise ShapeError(f"expected {n_in} input channels, got {inputs.n_channels}")
    ext = np.zeros((n_steps, net.n_sources), dtype=np.int32)
    ext[:, :n_in] = inputs.binned(dt * 1e6, n_steps)
    ext[:, n_in:] = noise_counts(net.noise, n_steps, dt, seed)
    return ext


def run(net: Network, inputs: SpikeTrain, duration: float | None = None, dt: float = dyn.DT,
        seed=0, probes=(), plasticity: Plasticity | None = None, backend=None) -> SimulationResult:
    """Simulate ``net`` driven by ``inputs`` for ``duration`` µs.

    With ``plasticity`` the Inp->E weights of ``net`` are updated in place.
    """
    if duration is None:
        duration = inputs.duration
    if not duration > 0 or not dt > 0:
        raise ValueError("duration and dt must be > 0")
    if len(inputs) and (inputs.times[0] < 0 or inputs.times[-1] > duration):
        raise ShapeError("input events must lie within [0, duration]")
    probes = np.asarray(list(probes), dtype=np.int32)
    if probes.size > MAX_PROBES:
        raise ValueError(f"at most {MAX_PROBES} probe neurons")
    kern = backend or _backend.kernels
    n_steps = int(round(duration * 1e-6 / dt))
    ext = external_counts(net, inputs, n_steps, dt, seed)
    syn_decay, syn_scale, per = _kernel_args(net, dt)

    c = net.config
    e0 = net.offsets["E"]
    if plasticity is not None:
        teacher = np.ascontiguousarray(plasticity.teacher, dtype=np.float64)
        if teacher.shape != (c.n_exc,):
            raise ShapeError(f"teacher must have {c.n_exc} entries")
        learn_args = (1, dyn.NMDA, 0, c.n_input, e0, c.n_exc,
                      math.exp(-dt / plasticity.tau_x), plasticity.pre_increment, plasticity.increment,
                      plasticity.alpha, plasticity.w_max, teacher)
    else:
        learn_args = (0, dyn.NMDA, 0, c.n_input, e0, c.n_exc, 1.0, 0.0, 0.0, 0.0, 0.0,
                      np.zeros(c.n_exc))

    t_start = time.perf_counter()
    raster, pmem, pahp = kern.simulate(
        ext, net.w_ext, net.w_rec, syn_decay, syn_scale,
        per["mem_decay"], per["mem_gain"], per["i_thr"], per["i_reset"], per["i_const"],
        per["tau_mem"], per["refr"], dt, per["ahp_decay"], per["ahp_inc"], probes, *learn_args)
    wall = time.perf_counter() - t_start

    sizes = {"FF": c.n_ff, "E": c.n_exc, "I": c.n_inh}
    spikes = {"Inp": inputs}
    dt_us = dt * 1e6
    for pop, n in sizes.items():
        o = net.offsets[pop]
        k, j = np.nonzero(raster[:, o:o + n])
        spikes[pop] = SpikeTrain([f"{pop}{i}" for i in range(n)], k * dt_us, j,
                                 float(n_steps * dt_us))
    return SimulationResult(spikes, np.asarray(raster), dict(net.offsets), sizes, dt,
                            float(duration), probes.tolist(),
                            np.asarray(pmem) if probes.size else None,
                            np.asarray(pahp) if probes.size else None, wall,
                            getattr(kern, "__name__", "").rsplit(".", 1)[-1])


def mean_rate(result: SimulationResult, population: str, window: tuple) -> np.ndarray:
    """Per-neuron firing rate (Hz) in the window (t0, t1) µs."""
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("empty window")
    return result.counts(population, t0, t1) / ((t1 - t0) * 1e-6)
