"""
Model and training descriptions.

A ModelSpec fixes the architecture of one classifier; a TrainConfig fixes the
optimizer and stopping schedule. Both are plain frozen dataclasses that
serialize to dicts for the model file envelope.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, Tuple

from kinspike.errors import SchemaError


class ModelKind(str, Enum):
    LSTM = "LSTM"
    CNN = "CNN"
    FCN = "FCN"


def parse_kind(value) -> ModelKind:
    try:
        return value if isinstance(value, ModelKind) else ModelKind(str(value).upper())
    except ValueError:
        raise SchemaError(f"unknown model kind: {value!r}") from None


# LSTM: BiLSTM total units (both directions), BiLSTM total units, dense, dense.
# CNN: conv filters, dense, dense. FCN: dense, dense, dense.
DEFAULT_LAYER_SIZES: Dict[ModelKind, Tuple[int, ...]] = {
    ModelKind.LSTM: (128, 64, 64, 16),
    ModelKind.CNN: (128, 128, 16),
    ModelKind.FCN: (128, 64, 16),
}

EMBEDDING_UNITS = 16
CNN_KERNEL_WIDTH = 3


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    num_classes: int
    input_shape: Tuple[int, int] = (40, 20)
    layer_sizes: Tuple[int, ...] = ()
    dropout_rate: float = 0.2
    batchnorm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        sizes = tuple(int(s) for s in (self.layer_sizes or DEFAULT_LAYER_SIZES[self.kind]))
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))

        expected = len(DEFAULT_LAYER_SIZES[self.kind])
        if len(sizes) != expected:
            raise SchemaError(f"{self.kind.value} needs {expected} layer sizes, got {len(sizes)}")
        if any(s <= 0 for s in sizes):
            raise SchemaError("layer sizes must be positive")
        if sizes[-1] != EMBEDDING_UNITS:
            raise SchemaError(f"final hidden layer must have {EMBEDDING_UNITS} units, got {sizes[-1]}")
        if self.kind is ModelKind.LSTM and (sizes[0] % 2 or sizes[1] % 2):
            raise SchemaError("bidirectional layer sizes must be even")
        if self.num_classes < 2:
            raise SchemaError("num_classes must be >= 2")
        if len(self.input_shape) != 2 or min(self.input_shape) < 1:
            raise SchemaError(f"invalid input shape {self.input_shape}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise SchemaError("dropout_rate must lie in [0, 1)")

    @property
    def window_length(self) -> int:
        return self.input_shape[0]

    @property
    def n_features(self) -> int:
        return self.input_shape[1]

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "num_classes": self.num_classes,
            "input_shape": list(self.input_shape),
            "layer_sizes": list(self.layer_sizes),
            "dropout_rate": self.dropout_rate,
            "batchnorm": self.batchnorm,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelSpec":
        try:
            return cls(
                kind=data["kind"],
                num_classes=int(data["num_classes"]),
                input_shape=tuple(data["input_shape"]),
                layer_sizes=tuple(data["layer_sizes"]),
                dropout_rate=float(data["dropout_rate"]),
                batchnorm=bool(data["batchnorm"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"invalid model spec: {e}") from e


@dataclass(frozen=True)
class TrainConfig:
    """Adam hyperparameters, batch size and early-stopping schedule."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 10
    seed: int = 42
    bn_momentum: float = 0.9

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise SchemaError("learning_rate must be positive")
        if self.batch_size < 1:
            raise SchemaError("batch_size must be positive")
        if self.max_epochs < 1 or self.patience < 1:
            raise SchemaError("max_epochs and patience must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise SchemaError("beta1 and beta2 must lie in [0, 1)")
        if not 0.0 <= self.bn_momentum < 1.0:
            raise SchemaError("bn_momentum must lie in [0, 1)")

    def to_dict(self) -> Dict:
        return asdict(self)
