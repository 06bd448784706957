"""
SNN file: the model file envelope of the source network plus an "snn" block
{neuron, amplitudes, dt, steps, input_gain, hybrid}. Folded weights are
recomputed from the source tensors on load.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

from kinspike.errors import FormatError, SchemaError
from kinspike.nets.serialization import decode_tensor, read_envelope, save
from kinspike.nets.spec import ModelSpec
from kinspike.spiking.converter import SpikingNetwork, convert
from kinspike.spiking.neurons import SpikingNeuronModel

logger = logging.getLogger(__name__)


def save_snn(snn: SpikingNetwork, path, metrics: Optional[Dict] = None, extra: Optional[Dict] = None) -> Path:
    neuron = snn.layers[0].neuron if snn.layers else SpikingNeuronModel()
    block = {
        "neuron": {"kind": neuron.kind.value, "tau_rc": neuron.tau_rc, "tau_ref": neuron.tau_ref},
        "amplitudes": snn.amplitudes,
        "dt": snn.dt,
        "steps": snn.steps,
        "input_gain": snn.input_gain,
        "hybrid": snn.hybrid,
        "layers": [layer.name for layer in snn.layers],
    }
    return save(snn.spec, snn.source_params, path, metrics=metrics, extra={**(extra or {}), "snn": block})


def load_snn(path) -> Tuple[SpikingNetwork, Dict]:
    """Read an SNN file written by ``save_snn``; returns (network, envelope)."""
    envelope = read_envelope(path, "convert")
    try:
        block = envelope["snn"]
        spec = ModelSpec.from_dict(envelope["spec"])
        neuron = SpikingNeuronModel(
            block["neuron"]["kind"], 1.0, float(block["neuron"]["tau_rc"]), float(block["neuron"]["tau_ref"])
        )
        params = {name: decode_tensor(name, rec) for name, rec in envelope["tensors"].items()}
        snn = convert(
            spec,
            params,
            neuron,
            dt=float(block["dt"]),
            steps=int(block["steps"]),
            input_gain=float(block["input_gain"]),
            amplitudes=[float(a) for a in block["amplitudes"]],
        )
    except (KeyError, TypeError, ValueError, SchemaError) as e:
        raise FormatError(f"{path}: invalid SNN file: {e}") from e
    return snn, envelope
