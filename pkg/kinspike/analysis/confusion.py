"""
Confusion matrices.

Rows are ground truth, columns are predictions, both in class-name order.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
import pandas as pd

from kinspike.errors import InputError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray
    classes: Tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def per_class_recall(self):
        support = self.counts.sum(axis=1)
        return {
            name: float(self.counts[i, i] / support[i]) if support[i] else 0.0
            for i, name in enumerate(self.classes)
        }

    def most_confused(self) -> Tuple[str, str, int]:
        """Off-diagonal cell with the most windows: (truth, prediction, count)."""
        off = self.counts.copy()
        np.fill_diagonal(off, -1)
        i, j = np.unravel_index(int(np.argmax(off)), off.shape)
        return self.classes[i], self.classes[j], int(max(off[i, j], 0))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.counts, columns=list(self.classes))
        frame.insert(0, "truth", list(self.classes))
        return frame

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    @classmethod
    def read_csv(cls, path) -> "ConfusionMatrix":
        frame = pd.read_csv(path)
        classes = tuple(frame.columns[1:])
        if tuple(frame["truth"]) != classes:
            raise SchemaError(f"{path}: row and column classes differ")
        return cls(frame[list(classes)].to_numpy(dtype=np.int64), classes)


def _indices(values: Sequence, classes: Sequence[str], what: str) -> np.ndarray:
    """Accept class indices or class names."""
    out = []
    lookup = {name: i for i, name in enumerate(classes)}
    for v in values:
        if isinstance(v, (int, np.integer)):
            if not 0 <= int(v) < len(classes):
                raise InputError(f"{what} index {int(v)} outside [0, {len(classes)})")
            out.append(int(v))
        else:
            key = getattr(v, "value", v)
            if key not in lookup:
                raise InputError(f"unknown {what} label: {v!r}")
            out.append(lookup[key])
    return np.asarray(out, dtype=np.int64)


def confusion(preds: Sequence, labels: Sequence, class_names: Sequence[str]) -> ConfusionMatrix:
    """Count (truth, prediction) pairs; labels may be indices or class names."""
    if len(preds) != len(labels):
        raise InputError(f"{len(preds)} predictions for {len(labels)} labels")
    classes = tuple(class_names)
    if len(set(classes)) != len(classes) or not classes:
        raise InputError("class names must be nonempty and unique")
    p = _indices(preds, classes, "prediction")
    y = _indices(labels, classes, "truth")
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(counts, (y, p), 1)
    return ConfusionMatrix(counts, classes)
