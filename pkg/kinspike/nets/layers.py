"""
Layers with analytic backward passes.

Layers hold no tensors. Parameters live in a flat ``{name: ndarray}`` dict
keyed "<layer>.<tensor>"; ``forward`` returns the output and a cache that
``backward`` consumes to produce the input gradient and parameter gradients.
Batch-norm running statistics are non-trainable entries of the same dict.
"""

from typing import Dict, Tuple

import numpy as np

from kinspike.errors import SchemaError

Params = Dict[str, np.ndarray]

BN_EPSILON = 1e-3


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: no parameters, identity shapes."""

    def __init__(self, name: str):
        self.name = name

    def key(self, tensor: str) -> str:
        return f"{self.name}.{tensor}"

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {}

    def state_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {}

    def init(self, rng) -> Params:
        return {}

    def forward(self, x: np.ndarray, params: Params, train: bool, rng=None):
        raise NotImplementedError

    def backward(self, dy: np.ndarray, cache, params: Params):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, name: str, n_in: int, n_out: int, bias: bool = True):
        super().__init__(name)
        self.n_in = n_in
        self.n_out = n_out
        self.bias = bias

    def param_shapes(self):
        shapes = {self.key("W"): (self.n_in, self.n_out)}
        if self.bias:
            shapes[self.key("b")] = (self.n_out,)
        return shapes

    def init(self, rng):
        params = {self.key("W"): _uniform(rng, self.n_in, (self.n_in, self.n_out))}
        if self.bias:
            params[self.key("b")] = np.zeros(self.n_out)
        return params

    def forward(self, x, params, train, rng=None):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise SchemaError(f"{self.name}: expected (N, {self.n_in}) input, got {x.shape}")
        y = x @ params[self.key("W")]
        if self.bias:
            y = y + params[self.key("b")]
        return y, x

    def backward(self, dy, cache, params):
        x = cache
        grads = {self.key("W"): x.T @ dy}
        if self.bias:
            grads[self.key("b")] = dy.sum(axis=0)
        return dy @ params[self.key("W")].T, grads


class BatchNorm(Layer):
    """
    Batch normalization over every axis but the last.

    Train mode normalizes with batch statistics and reports them in the cache
    (``cache["batch_mean"]``, ``cache["batch_var"]``) for the trainer's
    running-average update; eval mode uses the stored running statistics.
    """

    def __init__(self, name: str, n: int, eps: float = BN_EPSILON):
        super().__init__(name)
        self.n = n
        self.eps = eps

    def param_shapes(self):
        return {self.key("gamma"): (self.n,), self.key("beta"): (self.n,)}

    def state_shapes(self):
        return {self.key("mean"): (self.n,), self.key("var"): (self.n,)}

    def init(self, rng):
        return {
            self.key("gamma"): np.ones(self.n),
            self.key("beta"): np.zeros(self.n),
            self.key("mean"): np.zeros(self.n),
            self.key("var"): np.ones(self.n),
        }

    def forward(self, x, params, train, rng=None):
        axes = tuple(range(x.ndim - 1))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
        else:
            mean = params[self.key("mean")]
            var = params[self.key("var")]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        y = params[self.key("gamma")] * x_hat + params[self.key("beta")]
        cache = {"x_hat": x_hat, "inv_std": inv_std, "train": train, "batch_mean": mean, "batch_var": var}
        return y, cache

    def backward(self, dy, cache, params):
        axes = tuple(range(dy.ndim - 1))
        x_hat, inv_std = cache["x_hat"], cache["inv_std"]
        gamma = params[self.key("gamma")]
        grads = {self.key("gamma"): (dy * x_hat).sum(axis=axes), self.key("beta"): dy.sum(axis=axes)}
        dx_hat = dy * gamma
        if not cache["train"]:
            return dx_hat * inv_std, grads
        m = dy.size // dy.shape[-1]
        dx = (inv_std / m) * (
            m * dx_hat - dx_hat.sum(axis=axes) - x_hat * (dx_hat * x_hat).sum(axis=axes)
        )
        return dx, grads


class ReLU(Layer):
    def forward(self, x, params, train, rng=None):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, cache, params):
        return dy * cache, {}


class Dropout(Layer):
    """Inverted dropout; the identity in eval mode."""

    def __init__(self, name: str, rate: float):
        super().__init__(name)
        self.rate = rate

    def forward(self, x, params, train, rng=None):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise SchemaError(f"{self.name}: train-mode dropout needs a random stream")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dy, cache, params):
        return (dy if cache is None else dy * cache), {}


class Flatten(Layer):
    def forward(self, x, params, train, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache, params):
        return dy.reshape(cache), {}


class GlobalAveragePool(Layer):
    """Mean over the time axis: (N, L, C) -> (N, C)."""

    def forward(self, x, params, train, rng=None):
        return x.mean(axis=1), x.shape

    def backward(self, dy, cache, params):
        n, length, channels = cache
        return np.broadcast_to(dy[:, None, :] / length, cache).copy(), {}


class Conv1D(Layer):
    """Stride-1, same-padded temporal convolution; weights shaped (kernel, in, filters)."""

    def __init__(self, name: str, n_in: int, filters: int, kernel: int = 3, bias: bool = True):
        super().__init__(name)
        if kernel % 2 != 1:
            raise SchemaError("same padding needs an odd kernel width")
        self.n_in = n_in
        self.filters = filters
        self.kernel = kernel
        self.bias = bias

    @property
    def pad(self) -> int:
        return self.kernel // 2

    def param_shapes(self):
        shapes = {self.key("W"): (self.kernel, self.n_in, self.filters)}
        if self.bias:
            shapes[self.key("b")] = (self.filters,)
        return shapes

    def init(self, rng):
        fan_in = self.kernel * self.n_in
        params = {self.key("W"): _uniform(rng, fan_in, (self.kernel, self.n_in, self.filters))}
        if self.bias:
            params[self.key("b")] = np.zeros(self.filters)
        return params

    def _patches(self, x: np.ndarray) -> np.ndarray:
        padded = np.pad(x, ((0, 0), (self.pad, self.pad), (0, 0)))
        # (N, L, C, k) -> (N, L, k, C)
        views = np.lib.stride_tricks.sliding_window_view(padded, self.kernel, axis=1)
        return np.ascontiguousarray(views.transpose(0, 1, 3, 2))

    def forward(self, x, params, train, rng=None):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise SchemaError(f"{self.name}: expected (N, L, {self.n_in}) input, got {x.shape}")
        n, length, _ = x.shape
        patches = self._patches(x).reshape(n * length, self.kernel * self.n_in)
        w = params[self.key("W")].reshape(self.kernel * self.n_in, self.filters)
        y = (patches @ w).reshape(n, length, self.filters)
        if self.bias:
            y = y + params[self.key("b")]
        return y, (patches, x.shape)

    def backward(self, dy, cache, params):
        patches, shape = cache
        n, length, channels = shape
        flat_dy = dy.reshape(n * length, self.filters)
        w = params[self.key("W")].reshape(self.kernel * channels, self.filters)
        grads = {self.key("W"): (patches.T @ flat_dy).reshape(self.kernel, channels, self.filters)}
        if self.bias:
            grads[self.key("b")] = flat_dy.sum(axis=0)

        d_patches = (flat_dy @ w.T).reshape(n, length, self.kernel, channels)
        d_padded = np.zeros((n, length + 2 * self.pad, channels))
        for j in range(self.kernel):
            d_padded[:, j:j + length, :] += d_patches[:, :, j, :]
        return d_padded[:, self.pad:self.pad + length, :], grads


def lstm_forward(x: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray):
    """
    Run one LSTM direction over (N, T, F) inputs, gates ordered i, f, g, o.

    Returns all hidden states (N, T, H) and the cache for ``lstm_backward``.
    """
    n, steps, _ = x.shape
    hidden = wh.shape[0]
    xw = (x.reshape(n * steps, -1) @ wx).reshape(n, steps, 4 * hidden) + b

    h = np.zeros((n, hidden))
    c = np.zeros((n, hidden))
    hs = np.empty((n, steps, hidden))
    cs = np.empty((n, steps, hidden))
    gates = np.empty((n, steps, 4 * hidden))
    for t in range(steps):
        z = xw[:, t] + h @ wh
        i = sigmoid(z[:, :hidden])
        f = sigmoid(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = sigmoid(z[:, 3 * hidden:])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[:, t] = h
        cs[:, t] = c
        gates[:, t] = np.concatenate([i, f, g, o], axis=1)
    return hs, (x, hs, cs, gates)


def lstm_backward(dhs: np.ndarray, cache, wx: np.ndarray, wh: np.ndarray):
    """Backpropagation through time for ``lstm_forward``; ``dhs`` is dL/dh for every step."""
    x, hs, cs, gates = cache
    n, steps, features = x.shape
    hidden = wh.shape[0]

    dxw = np.empty((n, steps, 4 * hidden))
    dwh = np.zeros_like(wh)
    dh_next = np.zeros((n, hidden))
    dc_next = np.zeros((n, hidden))
    for t in reversed(range(steps)):
        i = gates[:, t, :hidden]
        f = gates[:, t, hidden:2 * hidden]
        g = gates[:, t, 2 * hidden:3 * hidden]
        o = gates[:, t, 3 * hidden:]
        c_prev = cs[:, t - 1] if t > 0 else np.zeros((n, hidden))
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((n, hidden))

        dh = dhs[:, t] + dh_next
        tanh_c = np.tanh(cs[:, t])
        dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g ** 2),
            dh * tanh_c * o * (1.0 - o),
        ], axis=1)
        dc_next = dc * f
        dwh += h_prev.T @ dz
        dh_next = dz @ wh.T
        dxw[:, t] = dz

    flat = dxw.reshape(n * steps, 4 * hidden)
    dwx = x.reshape(n * steps, features).T @ flat
    db = flat.sum(axis=0)
    dx = (flat @ wx.T).reshape(n, steps, features)
    return dx, dwx, dwh, db


class BiLSTM(Layer):
    """
    Bidirectional LSTM merged by concatenation.

    With ``return_sequences`` the output is (N, T, 2H) with the backward
    direction re-aligned to input time; otherwise it is (N, 2H): the forward
    direction's last state and the backward direction's state after it has
    consumed the whole window (aligned with t = 0).
    """

    DIRECTIONS = ("fw", "bw")

    def __init__(self, name: str, n_in: int, units: int, return_sequences: bool):
        super().__init__(name)
        self.n_in = n_in
        self.units = units
        self.return_sequences = return_sequences

    def param_shapes(self):
        shapes = {}
        for d in self.DIRECTIONS:
            shapes[self.key(f"{d}.Wx")] = (self.n_in, 4 * self.units)
            shapes[self.key(f"{d}.Wh")] = (self.units, 4 * self.units)
            shapes[self.key(f"{d}.b")] = (4 * self.units,)
        return shapes

    def init(self, rng):
        params = {}
        h = self.units
        for d in self.DIRECTIONS:
            params[self.key(f"{d}.Wx")] = _uniform(rng, self.n_in, (self.n_in, 4 * h))
            params[self.key(f"{d}.Wh")] = _uniform(rng, h, (h, 4 * h))
            bias = np.zeros(4 * h)
            bias[h:2 * h] = 1.0
            params[self.key(f"{d}.b")] = bias
        return params

    def _weights(self, params, d):
        return params[self.key(f"{d}.Wx")], params[self.key(f"{d}.Wh")], params[self.key(f"{d}.b")]

    def forward(self, x, params, train, rng=None):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise SchemaError(f"{self.name}: expected (N, T, {self.n_in}) input, got {x.shape}")
        hs_fw, cache_fw = lstm_forward(x, *self._weights(params, "fw"))
        hs_bw, cache_bw = lstm_forward(x[:, ::-1], *self._weights(params, "bw"))
        if self.return_sequences:
            y = np.concatenate([hs_fw, hs_bw[:, ::-1]], axis=2)
        else:
            y = np.concatenate([hs_fw[:, -1], hs_bw[:, -1]], axis=1)
        return y, (cache_fw, cache_bw, x.shape)

    def backward(self, dy, cache, params):
        cache_fw, cache_bw, shape = cache
        n, steps, _ = shape
        h = self.units
        if self.return_sequences:
            dhs_fw = dy[:, :, :h]
            dhs_bw = dy[:, ::-1, h:]
        else:
            dhs_fw = np.zeros((n, steps, h))
            dhs_bw = np.zeros((n, steps, h))
            dhs_fw[:, -1] = dy[:, :h]
            dhs_bw[:, -1] = dy[:, h:]

        grads = {}
        dx = np.zeros(shape)
        for d, dhs, c in (("fw", dhs_fw, cache_fw), ("bw", dhs_bw, cache_bw)):
            wx, wh, _ = self._weights(params, d)
            dxd, dwx, dwh, db = lstm_backward(np.ascontiguousarray(dhs), c, wx, wh)
            dx += dxd if d == "fw" else dxd[:, ::-1]
            grads[self.key(f"{d}.Wx")] = dwx
            grads[self.key(f"{d}.Wh")] = dwh
            grads[self.key(f"{d}.b")] = db
        return dx, grads
