"""
Movement deltas, threshold calibration and binary event encoding.

A log's positions become per-step movements; a movement above its feature's
threshold becomes an event (1), everything else is silence (0).
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from kinspike.errors import FormatError, InputError, SchemaError
from kinspike.ingestion.schema import SCHEMA
from kinspike.numcore.tensor import check_finite

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MovementSequence:
    """(T-1) x F signed per-step changes of one log."""

    deltas: np.ndarray
    log_id: str
    names: Tuple[str, ...] = SCHEMA.names

    @property
    def n_steps(self) -> int:
        return int(self.deltas.shape[0])

    def without_feature(self, index: int) -> "MovementSequence":
        """Drop one feature column (leave-one-feature-out)."""
        if not 0 <= index < len(self.names):
            raise SchemaError(f"feature index {index} outside [0, {len(self.names)})")
        names = self.names[:index] + self.names[index + 1:]
        return MovementSequence(np.delete(self.deltas, index, axis=1), self.log_id, names)


@dataclass(frozen=True, eq=False)
class ThresholdVector:
    theta: np.ndarray
    calibration_fraction: float
    names: Tuple[str, ...] = SCHEMA.names

    def to_dict(self) -> Dict:
        data = {name: float(t) for name, t in zip(self.names, self.theta)}
        data["fraction"] = float(self.calibration_fraction)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ThresholdVector":
        if "fraction" not in data:
            raise FormatError("thresholds lack the calibration fraction")
        names = tuple(k for k in data if k != "fraction")
        theta = np.array([float(data[n]) for n in names])
        if not np.all(np.isfinite(theta)) or np.any(theta < 0):
            raise FormatError("thresholds must be finite and nonnegative")
        return cls(theta, float(data["fraction"]), names)


@dataclass(frozen=True, eq=False)
class EventSequence:
    """(T-1) x F binary events of one log."""

    events: np.ndarray
    log_id: str
    thresholds: Optional[ThresholdVector] = None
    names: Tuple[str, ...] = SCHEMA.names

    @property
    def n_steps(self) -> int:
        return int(self.events.shape[0])


def deltas(log) -> MovementSequence:
    """Per-step movement: row t is frames[t+1] - frames[t]."""
    frames = np.asarray(log.frames, dtype=np.float64)
    if frames.ndim != 2:
        raise SchemaError(f"log frames must be 2-d, got {frames.ndim}-d")
    if frames.shape[0] < 2:
        raise InputError(f"log {log.log_id} has {frames.shape[0]} frames; deltas need at least 2")
    names = getattr(log, "names", SCHEMA.names)
    if len(names) != frames.shape[1]:
        raise SchemaError(f"log {log.log_id} has {frames.shape[1]} columns, schema has {len(names)}")
    return MovementSequence(np.diff(frames, axis=0), log.log_id, tuple(names))


def calibrate_thresholds(movements: Iterable[MovementSequence], fraction: float) -> ThresholdVector:
    """
    Per-feature threshold = fraction x corpus-wide mean |delta|.

    The mean pools every step of every log, so long logs weigh more than short ones.
    """
    if not fraction > 0:
        raise InputError(f"fraction must be positive, got {fraction}")
    movements = list(movements)
    if not movements:
        raise InputError("cannot calibrate thresholds on an empty corpus")

    names = movements[0].names
    total = np.zeros(len(names))
    steps = 0
    for m in movements:
        if m.names != names:
            raise SchemaError(f"movement {m.log_id} has a different feature layout")
        total += np.abs(m.deltas).sum(axis=0)
        steps += m.n_steps
    if steps == 0:
        raise InputError("cannot calibrate thresholds on a corpus without steps")

    theta = check_finite("thresholds", fraction * (total / steps))
    logger.info(f"Calibrated {len(names)} thresholds on {len(movements)} logs ({steps} steps), fraction {fraction}")
    return ThresholdVector(theta, float(fraction), names)


def encode_events(movements: MovementSequence, theta: ThresholdVector) -> EventSequence:
    """events[t, f] = 1 iff |deltas[t, f]| > theta[f]."""
    if len(theta.theta) != movements.deltas.shape[1]:
        raise SchemaError(
            f"threshold dimension {len(theta.theta)} does not match {movements.deltas.shape[1]} features"
        )
    events = (np.abs(movements.deltas) > theta.theta).astype(np.uint8)
    return EventSequence(events, movements.log_id, theta, movements.names)


def sparsity(events) -> float:
    """Fraction of entries equal to 1."""
    matrix = np.asarray(getattr(events, "events", events))
    if matrix.size == 0:
        raise InputError("sparsity of an empty event sequence is undefined")
    return float(np.count_nonzero(matrix == 1)) / matrix.size


def nonzero_fraction(values) -> float:
    matrix = np.asarray(getattr(values, "deltas", values))
    if matrix.size == 0:
        raise InputError("nonzero fraction of an empty matrix is undefined")
    return float(np.count_nonzero(matrix)) / matrix.size


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature mean/std scaling of raw deltas, fitted on the train partition."""

    mean: np.ndarray
    std: np.ndarray
    names: Tuple[str, ...] = SCHEMA.names

    @classmethod
    def fit(cls, movements: Sequence[MovementSequence]) -> "Standardizer":
        if not movements:
            raise InputError("cannot fit a standardizer on an empty corpus")
        stacked = np.concatenate([m.deltas for m in movements], axis=0)
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        # Constant features pass through centred but unscaled.
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std, movements[0].names)

    def transform(self, movements: MovementSequence) -> np.ndarray:
        if movements.deltas.shape[1] != len(self.mean):
            raise SchemaError("standardizer width does not match the movement features")
        return (movements.deltas - self.mean) / self.std

    def to_dict(self) -> Dict:
        return {
            "features": list(self.names),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Standardizer":
        try:
            names = tuple(data["features"])
            mean = np.array(data["mean"], dtype=np.float64)
            std = np.array(data["std"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid standardization record: {e}") from e
        if not (len(names) == len(mean) == len(std)) or np.any(std <= 0):
            raise FormatError("standardization record is inconsistent")
        return cls(mean, std, names)
