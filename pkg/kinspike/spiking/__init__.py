"""ANN-to-SNN conversion, spiking neuron models and discrete-time simulation."""

from kinspike.spiking.converter import SpikingLayer, SpikingNetwork, convert, rate_forward
from kinspike.spiking.neurons import NeuronKind, NeuronState, SpikingNeuronModel, neuron_step, rate
from kinspike.spiking.serialization import load_snn, save_snn
from kinspike.spiking.simulator import SimulationResult, SnnEvalResult, agreement, evaluate_snn, simulate

__all__ = [
    "SpikingLayer",
    "SpikingNetwork",
    "convert",
    "rate_forward",
    "NeuronKind",
    "NeuronState",
    "SpikingNeuronModel",
    "neuron_step",
    "rate",
    "load_snn",
    "save_snn",
    "SimulationResult",
    "SnnEvalResult",
    "agreement",
    "evaluate_snn",
    "simulate",
]
