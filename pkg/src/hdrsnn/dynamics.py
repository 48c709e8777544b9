"""Adaptive integrate-and-fire neurons and DPI-style synapses.

Every state variable is a current in pA and evolves by exponential Euler:
exact exponential relaxation over ``dt`` followed by impulse increments for
the spikes that arrived during the step.

Time constants follow the subthreshold translinear relation

    tau = C * U_T / (kappa * I_tau)

with capacitances in pF and currents in pA, so the result is in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

U_T = 0.025  # thermal voltage (V)
KAPPA = 0.7  # subthreshold slope factor
C_SYN = 1.5  # pF, shared by all synapse classes
DT = 100e-6  # s, default integration step

# Calibrated so the Full network stays sub-saturation over 0-8 kHz input.
I_W_BASE = 800.0  # pA per dimensionless weight unit
I_AHP_UNIT = 1500.0  # pA per adaptation increment

SYNAPSE_CLASSES = ("AMPA", "NMDA", "GABA_A", "GABA_B")
AMPA, NMDA, GABA_A, GABA_B = range(4)


class ParameterError(ValueError):
    """A physical parameter is outside its domain."""


def time_constant(i_tau: float, c: float) -> float:
    """Return ``c * U_T / (KAPPA * i_tau)`` in seconds (``c`` in pF, ``i_tau`` in pA)."""
    if not i_tau > 0 or not c > 0:
        raise ParameterError(f"time_constant needs i_tau > 0 and c > 0, got {i_tau}, {c}")
    return c * U_T / (KAPPA * i_tau)


@dataclass(frozen=True)
class SynapseParams:
    class_tag: str
    i_tau: float
    i_gain: float
    c_syn: float = C_SYN
    excitatory: bool = True

    def __post_init__(self):
        if self.class_tag not in SYNAPSE_CLASSES:
            raise ParameterError(f"unknown synapse class {self.class_tag!r}")
        if not (self.i_tau > 0 and self.i_gain > 0 and self.c_syn > 0):
            raise ParameterError(f"{self.class_tag}: i_tau, i_gain, c_syn must be > 0")
        if self.excitatory != (self.class_tag in ("AMPA", "NMDA")):
            raise ParameterError(f"{self.class_tag}: wrong excitatory flag")

    @property
    def tau(self) -> float:
        return time_constant(self.i_tau, self.c_syn)

    @property
    def index(self) -> int:
        return SYNAPSE_CLASSES.index(self.class_tag)


def default_synapses() -> dict[str, SynapseParams]:
    """Per-class defaults.

    GABA-A has no reference I_tau; it is set twice as fast as GABA-B. Its gain is
    raised fourfold so that the I->E loop acts within a few milliseconds.
    """
    return {
        "AMPA": SynapseParams("AMPA", i_tau=10.0, i_gain=10.0, excitatory=True),
        "NMDA": SynapseParams("NMDA", i_tau=5.0, i_gain=5.0, excitatory=True),
        "GABA_A": SynapseParams("GABA_A", i_tau=20.0, i_gain=80.0, excitatory=False),
        "GABA_B": SynapseParams("GABA_B", i_tau=10.0, i_gain=10.0, excitatory=False),
    }


@dataclass(frozen=True)
class NeuronParams:
    c_mem: float = 2.0
    i_leak: float = 5.0
    i_gain: float = 5.0
    i_thr: float = 2000.0
    i_reset: float = 1.2
    i_const: float = 1.0
    refractory: float = 3e-3
    adapt_i_tau: float = 0.04
    adapt_gain: float = 1.5
    adapt_enabled: bool = False
    i_ahp_unit: float = I_AHP_UNIT

    def __post_init__(self):
        currents = (self.i_leak, self.i_gain, self.i_thr, self.i_reset, self.i_const,
                    self.adapt_i_tau, self.i_ahp_unit)
        if any(c < 0 for c in currents) or self.adapt_gain < 0:
            raise ParameterError("neuron currents must be >= 0")
        if not self.i_thr > self.i_reset:
            raise ParameterError("i_thr must exceed i_reset")
        if self.refractory < 0:
            raise ParameterError("refractory must be >= 0")
        if not (self.c_mem > 0 and self.i_leak > 0 and self.adapt_i_tau > 0):
            raise ParameterError("c_mem, i_leak and adapt_i_tau must be > 0")

    @property
    def tau_mem(self) -> float:
        return time_constant(self.i_leak, self.c_mem)

    @property
    def tau_ahp(self) -> float:
        return time_constant(self.adapt_i_tau, self.c_mem)

    @property
    def ahp_increment(self) -> float:
        return self.adapt_gain * self.i_ahp_unit if self.adapt_enabled else 0.0


def excitatory_params(**kw) -> NeuronParams:
    return NeuronParams(refractory=3e-3, **kw)


def inhibitory_params(**kw) -> NeuronParams:
    return NeuronParams(refractory=1e-3, **kw)


@dataclass
class NeuronState:
    i_mem: float = 0.0
    i_ahp: float = 0.0
    i_syn: list[float] = field(default_factory=lambda: [0.0] * 4)
    refractory_until: float = -math.inf  # s

    def copy(self) -> "NeuronState":
        return replace(self, i_syn=list(self.i_syn))


def synaptic_increment(params: SynapseParams, n_spikes: float, weight: float,
                       i_w_base: float = I_W_BASE) -> float:
    return n_spikes * weight * i_w_base * (params.i_gain / params.i_tau)


def step_synapse(state: float, params: SynapseParams, dt: float, n_spikes: float,
                 weight: float, i_w_base: float = I_W_BASE) -> float:
    """Decay a synaptic current over ``dt`` then add ``n_spikes`` weighted impulses."""
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    if n_spikes < 0 or weight < 0:
        raise ParameterError("n_spikes and weight must be >= 0")
    decayed = state * math.exp(-dt / params.tau)
    return max(0.0, decayed + synaptic_increment(params, n_spikes, weight, i_w_base))


def input_current(state: NeuronState, params: NeuronParams) -> float:
    s = state.i_syn
    drive = s[AMPA] + s[NMDA] - s[GABA_A] - s[GABA_B] + params.i_const - state.i_ahp
    return max(0.0, drive)


def step_neuron(state: NeuronState, params: NeuronParams, dt: float,
                t_now: float) -> tuple[NeuronState, bool]:
    """Advance one neuron over the step [t_now, t_now + dt] (seconds).

    Synaptic currents in ``state`` are taken as already updated for this step.
    While refractory, i_mem is held at reset; if the refractory period ends
    inside the step, the membrane integrates over the remainder. A threshold
    crossing is timed within the step and the refractory period runs from the
    crossing. Returns a new state and whether the neuron fired.
    """
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    new = state.copy()
    i_in = input_current(state, params)
    new.i_ahp = state.i_ahp * math.exp(-dt / params.tau_ahp)
    h = dt
    start = state.i_mem
    left = state.refractory_until - t_now
    if left > 0:
        start = params.i_reset
        if left >= dt:
            new.i_mem = params.i_reset
            return new, False
        h = dt - left
    target = params.i_gain / params.i_leak * i_in
    v = target + (start - target) * math.exp(-h / params.tau_mem)
    if v < params.i_thr:
        new.i_mem = v
        return new, False
    ts = 0.0
    if start < params.i_thr:
        ts = params.tau_mem * math.log((target - start) / (target - params.i_thr))
    t_cross = t_now + dt - h + min(ts, h)
    new.i_mem = params.i_reset
    new.refractory_until = t_cross + params.refractory
    new.i_ahp += params.ahp_increment
    return new, True
