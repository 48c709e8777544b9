import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdrsnn import dynamics as dyn
from hdrsnn.dynamics import (NeuronParams, NeuronState, ParameterError, SynapseParams,
                             default_synapses, step_neuron, step_synapse, time_constant)

DT = 100e-6


def drive_neuron(params, i_in, duration=1.0, dt=DT):
    """Constant AMPA current ``i_in``; returns exact crossing times of all spikes."""
    state = NeuronState(i_syn=[i_in, 0.0, 0.0, 0.0])
    crossings = []
    for k in range(int(round(duration / dt))):
        state, fired = step_neuron(state, params, dt, k * dt)
        if fired:
            crossings.append(state.refractory_until - params.refractory)
    return crossings


# time constants: values worked out by hand from C*U_T/(kappa*I)

@pytest.mark.parametrize("i_tau, c, expected", [
    (10.0, 1.5, 5.357e-3),
    (5.0, 2.0, 14.29e-3),
    (0.04, 2.0, 1.786),
])
def test_time_constant_examples(i_tau, c, expected):
    assert time_constant(i_tau, c) == pytest.approx(expected, rel=5e-4)


@pytest.mark.parametrize("i_tau, c", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_time_constant_rejects_non_positive(i_tau, c):
    with pytest.raises(ParameterError):
        time_constant(i_tau, c)


def test_synapse_params_invariants():
    with pytest.raises(ParameterError):
        SynapseParams("AMPA", i_tau=0.0, i_gain=1.0)
    with pytest.raises(ParameterError):
        SynapseParams("GABA_A", i_tau=1.0, i_gain=1.0, excitatory=True)
    with pytest.raises(ParameterError):
        SynapseParams("GLY", i_tau=1.0, i_gain=1.0)
    syn = default_synapses()
    assert [syn[t].excitatory for t in dyn.SYNAPSE_CLASSES] == [True, True, False, False]


def test_default_synapse_time_constants():
    syn = default_synapses()
    assert syn["AMPA"].i_tau == 10.0
    assert syn["NMDA"].i_tau == 5.0
    assert syn["GABA_B"].i_tau == 10.0


def test_neuron_defaults():
    p = NeuronParams()
    assert (p.c_mem, p.i_leak, p.i_thr, p.i_reset, p.i_const, p.i_gain) == (2.0, 5.0, 2000.0, 1.2, 1.0, 5.0)
    assert (p.adapt_i_tau, p.adapt_gain, p.refractory) == (0.04, 1.5, 3e-3)
    assert dyn.inhibitory_params().refractory == 1e-3


def test_neuron_params_invariants():
    with pytest.raises(ParameterError):
        NeuronParams(i_thr=1.0, i_reset=2.0)
    with pytest.raises(ParameterError):
        NeuronParams(refractory=-1e-3)
    with pytest.raises(ParameterError):
        NeuronParams(i_leak=-5.0)


# synapse update

def test_step_synapse_one_efold():
    ampa = default_synapses()["AMPA"]
    assert step_synapse(100.0, ampa, ampa.tau, 0, 0.7) == pytest.approx(36.79, abs=5e-3)


def test_step_synapse_zero_fixed_point():
    for syn in default_synapses().values():
        assert step_synapse(0.0, syn, 3e-3, 0, 1.3) == 0.0


def test_step_synapse_single_spike_increment():
    ampa = SynapseParams("AMPA", i_tau=10.0, i_gain=10.0)
    assert step_synapse(0.0, ampa, 1e-9, 1, 1.0, i_w_base=60.0) == 60.0
    assert step_synapse(0.0, ampa, 1e-9, 1, 1.0) == dyn.I_W_BASE


def test_step_synapse_rejects_bad_input():
    ampa = default_synapses()["AMPA"]
    with pytest.raises(ParameterError):
        step_synapse(1.0, ampa, 0.0, 0, 1.0)
    with pytest.raises(ParameterError):
        step_synapse(1.0, ampa, DT, -1, 1.0)


@settings(max_examples=200, deadline=None)
@given(state=st.floats(0.0, 1e6), dt=st.floats(1e-7, 1e-1),
       tag=st.sampled_from(dyn.SYNAPSE_CLASSES))
def test_step_synapse_split_step_exact(state, dt, tag):
    syn = default_synapses()[tag]
    whole = step_synapse(state, syn, dt, 0, 1.0)
    halves = step_synapse(step_synapse(state, syn, dt / 2, 0, 1.0), syn, dt / 2, 0, 1.0)
    assert halves == pytest.approx(whole, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(spikes=st.lists(st.tuples(st.integers(0, 5), st.floats(0.0, 2.0)), max_size=60),
       tag=st.sampled_from(dyn.SYNAPSE_CLASSES))
def test_synapse_and_neuron_states_stay_non_negative(spikes, tag):
    syn = default_synapses()[tag]
    params = NeuronParams(adapt_enabled=True)
    state = NeuronState()
    for k, (n, w) in enumerate(spikes):
        i_syn = list(state.i_syn)
        i_syn[syn.index] = step_synapse(i_syn[syn.index], syn, DT, n, w)
        state.i_syn = i_syn
        state, _ = step_neuron(state, params, DT, k * DT)
        assert state.i_mem >= 0 and state.i_ahp >= 0 and min(state.i_syn) >= 0


# neuron update

def test_subthreshold_fixed_point_never_fires():
    p = NeuronParams()
    state = NeuronState()
    fired_any = False
    for k in range(20000):
        state, fired = step_neuron(state, p, DT, k * DT)
        fired_any |= fired
    assert not fired_any
    assert state.i_mem == pytest.approx(1.0, rel=1e-6)


def test_suprathreshold_drive_fires_periodically():
    p = NeuronParams()
    spikes = drive_neuron(p, 20000.0)
    isi = [b - a for a, b in zip(spikes, spikes[1:])]
    assert len(spikes) > 100
    assert min(isi) >= p.refractory
    assert max(isi) - min(isi) < 1e-9


def test_isi_matches_closed_form():
    # reset -> threshold relaxation time plus refractory
    p = NeuronParams(refractory=1e-3)
    i_in = 5000.0
    target = p.i_gain / p.i_leak * (i_in + p.i_const)
    isi = p.refractory + p.tau_mem * math.log((target - p.i_reset) / (target - p.i_thr))
    spikes = drive_neuron(p, i_in)
    assert spikes[2] - spikes[1] == pytest.approx(isi, rel=1e-9)


def test_refractory_holds_membrane_at_reset():
    p = NeuronParams()
    state = NeuronState(i_mem=50.0, i_syn=[1e5, 0, 0, 0], refractory_until=1.0)
    new, fired = step_neuron(state, p, DT, 0.5)
    assert not fired and new.i_mem == p.i_reset


@pytest.mark.parametrize("i_in", [3e4, 6e4, 2e5, 1e6])
def test_adaptation_rate_non_increasing(i_in):
    # the AHP current is sampled on the step grid; steady-state ISIs jitter below 1 µs
    p = NeuronParams(adapt_enabled=True)
    spikes = drive_neuron(p, i_in, duration=2.0)
    isi = np.diff(spikes)
    assert len(isi) > 10
    assert np.all(np.diff(isi) >= -1e-6)
    assert isi[-1] > isi[0]


def test_adaptation_lowers_steady_rate():
    for i_in in (3000.0, 8000.0, 30000.0):
        plain = len(drive_neuron(NeuronParams(), i_in))
        adapted = len(drive_neuron(NeuronParams(adapt_enabled=True), i_in))
        assert adapted <= plain


def test_f_i_curve_monotone_and_bounded():
    for refractory in (1e-3, 3e-3):
        p = NeuronParams(refractory=refractory)
        drives = [2000.0 * 1.35 ** k for k in range(20)]
        rates = [len(drive_neuron(p, i)) for i in drives]
        assert all(b >= a for a, b in zip(rates, rates[1:]))
        assert max(rates) <= 1.0 / refractory
        assert rates[-1] > 0.9 / refractory


@settings(max_examples=25, deadline=None)
@given(i_in=st.floats(2001.0, 3e5), refractory=st.sampled_from([1e-3, 3e-3]))
def test_halving_dt_changes_count_by_at_most_two(i_in, refractory):
    p = NeuronParams(refractory=refractory)
    coarse = len(drive_neuron(p, i_in, dt=DT))
    fine = len(drive_neuron(p, i_in, dt=DT / 2))
    if max(coarse, fine) <= 500:
        assert abs(coarse - fine) <= 2
