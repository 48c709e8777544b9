"""Spiking network for high-dynamic-range biosignal compression."""

from ._backend import NAME as BACKEND
from .dynamics import NeuronParams, NeuronState, SynapseParams
from .encoders import AdmParams, AnalogRecording, PfmParams, SpikeTrain
from .engine import run
from .harness import ablation_run, calibrate_weight_unit, evaluate, io_curve
from .learning import ClassMap, TraceParams, train
from .topology import NetworkConfig, build_network

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "NeuronParams", "NeuronState", "SynapseParams", "AdmParams", "AnalogRecording",
    "PfmParams", "SpikeTrain", "run", "ablation_run", "calibrate_weight_unit", "evaluate",
    "io_curve", "ClassMap", "TraceParams", "train", "NetworkConfig", "build_network",
]
