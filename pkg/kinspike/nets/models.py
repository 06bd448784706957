"""
The three classifiers (BiLSTM, 1-D CNN, FCN) as layer stacks.

Every stack ends with a 16-unit dense layer (batch norm and ReLU after it)
whose activation is the embedding, followed by the linear output layer and a
softmax.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from kinspike.errors import SchemaError
from kinspike.nets.layers import (
    BatchNorm,
    BiLSTM,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    GlobalAveragePool,
    Layer,
    Params,
    ReLU,
)
from kinspike.nets.spec import CNN_KERNEL_WIDTH, ModelKind, ModelSpec
from kinspike.numcore.rng import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ForwardResult:
    probs: np.ndarray
    embedding: np.ndarray
    logits: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    n = logits.shape[0]
    loss = float(np.mean(log_z - shifted[np.arange(n), labels]))
    dlogits = softmax(logits)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


class Network:
    """Layer stack of a ModelSpec."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.layers: List[Layer] = []
        self._build()
        # index of the ReLU whose output is the embedding
        self.embedding_index = len(self.layers) - 2

    def _dense_block(self, name: str, n_in: int, n_out: int, dropout: bool):
        spec = self.spec
        self.layers.append(Dense(name, n_in, n_out, bias=not spec.batchnorm))
        if spec.batchnorm:
            self.layers.append(BatchNorm(f"{name}.bn", n_out))
        self.layers.append(ReLU(f"{name}.relu"))
        if dropout:
            self.layers.append(Dropout(f"{name}.drop", spec.dropout_rate))

    def _build(self):
        spec = self.spec
        length, features = spec.input_shape
        sizes = spec.layer_sizes

        if spec.kind is ModelKind.LSTM:
            self.layers.append(BiLSTM("lstm1", features, sizes[0] // 2, return_sequences=True))
            self.layers.append(Dropout("lstm1.drop", spec.dropout_rate))
            self.layers.append(BiLSTM("lstm2", sizes[0], sizes[1] // 2, return_sequences=False))
            self.layers.append(Dropout("lstm2.drop", spec.dropout_rate))
            self._dense_block("dense1", sizes[1], sizes[2], dropout=True)
            self._dense_block("dense2", sizes[2], sizes[3], dropout=False)
        elif spec.kind is ModelKind.CNN:
            self.layers.append(Conv1D("conv1", features, sizes[0], CNN_KERNEL_WIDTH, bias=not spec.batchnorm))
            if spec.batchnorm:
                self.layers.append(BatchNorm("conv1.bn", sizes[0]))
            self.layers.append(ReLU("conv1.relu"))
            self.layers.append(Dropout("conv1.drop", spec.dropout_rate))
            self.layers.append(GlobalAveragePool("pool"))
            self._dense_block("dense1", sizes[0], sizes[1], dropout=True)
            self._dense_block("dense2", sizes[1], sizes[2], dropout=False)
        else:
            self.layers.append(Flatten("flatten"))
            self._dense_block("dense1", length * features, sizes[0], dropout=True)
            self._dense_block("dense2", sizes[0], sizes[1], dropout=True)
            self._dense_block("dense3", sizes[1], sizes[2], dropout=False)

        self.layers.append(Dense("out", sizes[-1], spec.num_classes, bias=True))

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        return shapes

    def state_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes = {}
        for layer in self.layers:
            shapes.update(layer.state_shapes())
        return shapes

    def all_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
            shapes.update(layer.state_shapes())
        return shapes

    def trainable_names(self) -> List[str]:
        return list(self.param_shapes())

    def init(self, seed: int) -> Params:
        params = {}
        for layer in self.layers:
            params.update(layer.init(make_rng(seed, "init", layer.name)))
        return params

    def check_params(self, params: Params):
        for name, shape in self.all_shapes().items():
            if name not in params:
                raise SchemaError(f"missing parameter {name}")
            if tuple(params[name].shape) != shape:
                raise SchemaError(f"parameter {name} has shape {params[name].shape}, expected {shape}")

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or tuple(x.shape[1:]) != self.spec.input_shape:
            raise SchemaError(f"expected (N, {self.spec.input_shape[0]}, {self.spec.input_shape[1]}) input, got {x.shape}")
        if x.shape[0] == 0:
            raise SchemaError("empty batch")
        return x

    def run(self, x: np.ndarray, params: Params, train: bool, rng=None):
        """Forward pass keeping caches; returns (logits, embedding, caches)."""
        h = self._check_input(x)
        caches = []
        embedding = None
        for i, layer in enumerate(self.layers):
            h, cache = layer.forward(h, params, train, rng)
            caches.append(cache)
            if i == self.embedding_index:
                embedding = h
        return h, embedding, caches

    def forward(self, x: np.ndarray, params: Params, train: bool = False, rng=None) -> ForwardResult:
        logits, embedding, _ = self.run(x, params, train, rng)
        return ForwardResult(softmax(logits), embedding, logits)

    def loss_and_grads(self, x, y, params: Params, train: bool = True, rng=None):
        """
        Mean cross-entropy, gradients of every trainable tensor, and the batch
        statistics of each batch-norm layer (train mode only).
        """
        y = np.asarray(y, dtype=np.int64)
        if y.min() < 0 or y.max() >= self.spec.num_classes:
            raise SchemaError(f"labels must lie in [0, {self.spec.num_classes})")
        logits, _, caches = self.run(x, params, train, rng)
        loss, d = cross_entropy(logits, y)

        grads = {}
        batch_stats = {}
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            d, layer_grads = layer.backward(d, cache, params)
            grads.update(layer_grads)
            if isinstance(layer, BatchNorm) and cache["train"]:
                batch_stats[layer.name] = (cache["batch_mean"], cache["batch_var"])
        ordered = {name: grads[name] for name in self.trainable_names()}
        return loss, ordered, batch_stats


@lru_cache(maxsize=64)
def network_for(spec: ModelSpec) -> Network:
    return Network(spec)


def build(spec: ModelSpec, seed: int) -> Params:
    """Initialize parameters with fan-in-scaled uniform draws; LSTM forget biases start at 1."""
    return network_for(spec).init(seed)


def forward(spec: ModelSpec, params: Params, x, train: bool = False, rng=None) -> ForwardResult:
    return network_for(spec).forward(x, params, train, rng)


def loss_and_grads(spec: ModelSpec, params: Params, x, y, train: bool = True, rng=None):
    loss, grads, _ = network_for(spec).loss_and_grads(x, y, params, train, rng)
    return loss, grads


def count_params(spec: ModelSpec) -> int:
    """Number of trainable scalars."""
    return int(sum(np.prod(shape) for shape in network_for(spec).param_shapes().values()))


def predict_batches(spec: ModelSpec, params: Params, x: np.ndarray, batch_size: int = 256) -> ForwardResult:
    """Eval-mode forward in chunks."""
    x = np.asarray(x, dtype=np.float64)
    parts = [forward(spec, params, x[i:i + batch_size]) for i in range(0, x.shape[0], batch_size)]
    return ForwardResult(
        np.concatenate([p.probs for p in parts]),
        np.concatenate([p.embedding for p in parts]),
        np.concatenate([p.logits for p in parts]),
    )


def fold_batchnorm(spec: ModelSpec, params: Params) -> Tuple[List[Dict], Optional[int]]:
    """
    Fold every batch-norm layer into the preceding affine layer.

    Returns an ordered list of stage dicts {kind, name, W, b, relu} covering
    the stack after any recurrent front, plus the index of the layer whose
    output is the embedding. ``kind`` is "dense", "conv" or "pool".
    """
    net = network_for(spec)
    stages: List[Dict] = []
    embedding_stage = None
    layers = net.layers
    i = 0
    while i < len(layers):
        layer = layers[i]
        if isinstance(layer, (Dense, Conv1D)):
            w = params[layer.key("W")].copy()
            b = params[layer.key("b")].copy() if layer.bias else np.zeros(w.shape[-1])
            nxt = layers[i + 1] if i + 1 < len(layers) else None
            if isinstance(nxt, BatchNorm):
                scale = params[nxt.key("gamma")] / np.sqrt(params[nxt.key("var")] + nxt.eps)
                w = w * scale
                b = params[nxt.key("beta")] + (b - params[nxt.key("mean")]) * scale
                i += 1
            relu = i + 1 < len(layers) and isinstance(layers[i + 1], ReLU)
            stages.append({
                "kind": "conv" if isinstance(layer, Conv1D) else "dense",
                "name": layer.name,
                "W": w,
                "b": b,
                "relu": relu,
            })
            if relu and i + 1 == net.embedding_index:
                embedding_stage = len(stages) - 1
        elif isinstance(layer, GlobalAveragePool):
            stages.append({"kind": "pool", "name": layer.name})
        i += 1
    return stages, embedding_stage
