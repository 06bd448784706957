"""From-scratch BiLSTM, 1-D CNN and FCN classifiers: build, train, evaluate, persist."""

from kinspike.nets.models import Network, build, count_params, forward, loss_and_grads, network_for
from kinspike.nets.serialization import load, save
from kinspike.nets.spec import ModelKind, ModelSpec, TrainConfig
from kinspike.nets.trainer import EvalResult, TrainHistory, class_names, evaluate, train

__all__ = [
    "Network",
    "build",
    "count_params",
    "forward",
    "loss_and_grads",
    "network_for",
    "load",
    "save",
    "ModelKind",
    "ModelSpec",
    "TrainConfig",
    "EvalResult",
    "TrainHistory",
    "class_names",
    "evaluate",
    "train",
]
