"""
ANN to SNN conversion.

Batch norm is folded into the preceding affine layer and dropout is dropped.
Every ReLU layer of the dense/convolutional stack becomes a population of
rate-matched spiking neurons; the output layer stays a non-spiking linear
readout. The convolution becomes a dense (Toeplitz) map over the flattened
window and the temporal average pool is folded into the following dense
layer. Recurrent layers cannot spike: a BiLSTM model converts to a hybrid
whose recurrent front runs in rate mode.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from kinspike.errors import ConversionError, SchemaError
from kinspike.nets.layers import BiLSTM, Dropout, Params
from kinspike.nets.models import fold_batchnorm, network_for, softmax
from kinspike.nets.spec import ModelKind, ModelSpec
from kinspike.numcore.rng import make_rng
from kinspike.spiking.neurons import SpikingNeuronModel

logger = logging.getLogger(__name__)

# Calibrated layers fire at most at this fraction of the 1/dt ceiling.
MAX_RATE_FRACTION = 0.5
CALIBRATION_WINDOWS = 1000


@dataclass(frozen=True, eq=False)
class SpikingLayer:
    name: str
    W: np.ndarray
    b: np.ndarray
    neuron: SpikingNeuronModel

    @property
    def size(self) -> int:
        return int(self.W.shape[1])


@dataclass(frozen=True, eq=False)
class SpikingNetwork:
    """
    Converted network: spiking layers in order, then a linear readout.

    ``front`` holds the source parameters when the recurrent layers run in
    rate mode (hybrid); it is None for fully spiking networks.
    """

    spec: ModelSpec
    layers: List[SpikingLayer]
    readout_W: np.ndarray
    readout_b: np.ndarray
    dt: float = 0.001
    steps: int = 200
    input_gain: float = 1.0
    front: Optional[Params] = None
    source_params: Params = field(default_factory=dict)

    @property
    def hybrid(self) -> bool:
        return self.front is not None

    @property
    def amplitudes(self) -> List[float]:
        return [layer.neuron.amplitude for layer in self.layers]


def conv_to_dense(w: np.ndarray, b: np.ndarray, length: int):
    """
    Dense equivalent of a same-padded stride-1 convolution.

    Maps the flattened (length x in) window to the flattened (length x filters)
    feature map, row index t * channels + c on both sides.
    """
    kernel, channels, filters = w.shape
    pad = kernel // 2
    dense = np.zeros((length * channels, length * filters))
    for t in range(length):
        for j in range(kernel):
            s = t + j - pad
            if 0 <= s < length:
                dense[s * channels:(s + 1) * channels, t * filters:(t + 1) * filters] += w[j]
    return dense, np.tile(b, length)


def _linear_stages(spec: ModelSpec, params: Params) -> List[Dict]:
    """Folded stages with the conv expanded and the pool merged into its successor."""
    stages, _ = fold_batchnorm(spec, params)
    merged = []
    pool_pending = False
    for stage in stages:
        if stage["kind"] == "pool":
            pool_pending = True
            continue
        w, b = stage["W"], stage["b"]
        if stage["kind"] == "conv":
            w, b = conv_to_dense(w, b, spec.window_length)
        elif pool_pending:
            w = np.tile(w, (spec.window_length, 1)) / spec.window_length
            pool_pending = False
        merged.append({"name": stage["name"], "W": w, "b": b, "relu": stage["relu"]})
    return merged


def front_forward(spec: ModelSpec, params: Params, x: np.ndarray) -> np.ndarray:
    """Eval-mode recurrent front of a BiLSTM model: (N, L, F) -> (N, units)."""
    h = x
    for layer in network_for(spec).layers:
        if isinstance(layer, BiLSTM):
            h, _ = layer.forward(h, params, train=False)
        elif isinstance(layer, Dropout):
            continue
        else:
            break
    return h


def present_input(snn_spec: ModelSpec, front: Optional[Params], x: np.ndarray, gain: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or tuple(x.shape[1:]) != snn_spec.input_shape:
        raise SchemaError(f"expected (N, {snn_spec.input_shape[0]}, {snn_spec.input_shape[1]}) input, got {x.shape}")
    if front is not None:
        return front_forward(snn_spec, front, x * gain)
    return x.reshape(x.shape[0], -1) * gain


def rate_forward(snn: SpikingNetwork, x: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Rate-mode (non-spiking) pass through the folded network.

    Returns {"logits", "probs", "activations": list per spiking layer}.
    """
    h = present_input(snn.spec, snn.front, x, snn.input_gain)
    activations = []
    for layer in snn.layers:
        h = np.maximum(h @ layer.W + layer.b, 0.0)
        activations.append(h)
    logits = h @ snn.readout_W + snn.readout_b
    return {"logits": logits, "probs": softmax(logits), "activations": activations}


def convert(
    spec: ModelSpec,
    params: Params,
    neuron: Optional[SpikingNeuronModel] = None,
    dt: float = 0.001,
    steps: int = 200,
    input_gain: float = 1.0,
    calibration: Optional[np.ndarray] = None,
    percentile: float = 99.9,
    fully_spiking: bool = False,
    amplitudes: Optional[List[float]] = None,
) -> SpikingNetwork:
    """
    Convert a trained network to a spiking network.

    Args:
        spec, params: source network
        neuron: neuron model; its amplitude applies to layers without calibration
        dt, steps, input_gain: simulation settings stored with the network
        calibration: windows whose rate-mode activations set each layer's amplitude
            (the percentile activation maps to half the 1/dt ceiling)
        percentile: activation percentile used for calibration
        fully_spiking: refuse to leave recurrent layers in rate mode
        amplitudes: explicit per-layer amplitudes (overrides calibration)

    Raises:
        ConversionError: a layer has no spiking equivalent and ``fully_spiking`` is set
    """
    neuron = neuron or SpikingNeuronModel()
    net = network_for(spec)
    net.check_params(params)
    if spec.kind is ModelKind.LSTM and fully_spiking:
        raise ConversionError("lstm1", "recurrent layers have no spiking equivalent; use the hybrid conversion")

    stages = _linear_stages(spec, params)
    hidden, readout = stages[:-1], stages[-1]
    if readout["relu"] or not all(s["relu"] for s in hidden):
        raise ConversionError(readout["name"], "expected ReLU hidden layers and a linear output")

    front = {k: v for k, v in params.items() if k.startswith("lstm")} if spec.kind is ModelKind.LSTM else None
    layers = [SpikingLayer(s["name"], s["W"], s["b"], neuron) for s in hidden]
    snn = SpikingNetwork(spec, layers, readout["W"], readout["b"], dt, steps, input_gain, front, dict(params))

    if amplitudes is not None:
        if len(amplitudes) != len(layers):
            raise SchemaError(f"{len(amplitudes)} amplitudes given for {len(layers)} spiking layers")
        scaled = [float(a) for a in amplitudes]
    elif calibration is not None and len(calibration):
        activations = rate_forward(snn, calibration)["activations"]
        ceiling = MAX_RATE_FRACTION / dt
        scaled = []
        for act in activations:
            peak = float(np.percentile(act, percentile))
            scaled.append(peak / ceiling if peak > 0 else neuron.amplitude)
    else:
        scaled = [neuron.amplitude] * len(layers)

    layers = [SpikingLayer(l.name, l.W, l.b, neuron.with_amplitude(a)) for l, a in zip(layers, scaled)]
    logger.info(
        f"Converted {spec.kind.value} to {'hybrid' if front is not None else 'spiking'} network: "
        f"layers={[l.size for l in layers]} amplitudes={[f'{a:.3g}' for a in scaled]}"
    )
    return SpikingNetwork(spec, layers, readout["W"], readout["b"], dt, steps, input_gain, front, dict(params))


def calibration_sample(x: np.ndarray, limit: int = CALIBRATION_WINDOWS, seed: int = 0) -> np.ndarray:
    """At most ``limit`` windows of ``x``, drawn without replacement and kept in order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] <= limit:
        return x
    keep = np.sort(make_rng(seed, "calibration").choice(x.shape[0], size=limit, replace=False))
    return x[keep]
