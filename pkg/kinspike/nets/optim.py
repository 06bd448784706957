"""Adam updates over a named parameter dict."""

import math
from typing import Dict

import numpy as np

from kinspike.nets.spec import TrainConfig


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "Adam":
        return cls(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]):
        """Update ``params`` in place from ``grads``."""
        self.t += 1
        lr_t = self.lr * math.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for name, grad in grads.items():
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(grad)
                self.v[name] = np.zeros_like(grad)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            params[name] = params[name] - lr_t * m / (np.sqrt(v) + self.eps)
