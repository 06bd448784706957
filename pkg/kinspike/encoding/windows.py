"""
Fixed-length windows and the leak-free train/test split.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from kinspike.errors import InputError
from kinspike.ingestion.schema import OperatorId, TaskId, parse_operator, parse_task
from kinspike.numcore.rng import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EventWindow:
    """One model input: a length x F slice plus the labels of its source log."""

    x: np.ndarray
    task: TaskId
    operator: OperatorId
    log_id: str
    start: int

    def label(self, target: str) -> str:
        return self.task.value if target == "task" else self.operator.value


def window(events, length: int = 40, stride: int = 20, *, labels: Tuple[str, str, str]) -> List[EventWindow]:
    """
    Slice an event (or scaled-delta) sequence into windows.

    Offsets run 0, stride, 2*stride, ... while offset + length <= steps; the
    trailing remainder is dropped and a sequence shorter than ``length``
    yields no windows.

    Args:
        events: EventSequence or (steps x F) matrix
        length: window length
        stride: offset between consecutive windows
        labels: (task, operator, log_id) copied into every window
    """
    if length < 1 or stride < 1:
        raise InputError(f"window length and stride must be >= 1, got {length}, {stride}")
    matrix = np.asarray(getattr(events, "events", events))
    task, operator, log_id = labels
    task = parse_task(task)
    operator = parse_operator(operator)

    n_steps = matrix.shape[0]
    if n_steps < length:
        return []
    return [
        EventWindow(matrix[start:start + length], task, operator, log_id, start)
        for start in range(0, n_steps - length + 1, stride)
    ]


def window_count(n_steps: int, length: int, stride: int) -> int:
    return 0 if n_steps < length else (n_steps - length) // stride + 1


def stack_windows(windows: Sequence[EventWindow], target: str, classes: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack windows into (N, L, F) inputs and integer class labels."""
    if not windows:
        raise InputError("no windows to stack")
    index = {name: i for i, name in enumerate(classes)}
    x = np.stack([w.x for w in windows]).astype(np.float64)
    try:
        y = np.array([index[w.label(target)] for w in windows], dtype=np.int64)
    except KeyError as e:
        raise InputError(f"window label {e} is not a known class") from None
    return x, y


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: List[EventWindow]
    test: List[EventWindow]
    holdout: Dict[str, List[str]] = field(default_factory=dict)
    seed: int = 0

    @property
    def train_log_ids(self) -> List[str]:
        return sorted({w.log_id for w in self.train})

    @property
    def test_log_ids(self) -> List[str]:
        return sorted({w.log_id for w in self.test})

    def to_dict(self) -> Dict:
        return {
            "seed": self.seed,
            "holdout": {cell: ids for cell, ids in sorted(self.holdout.items())},
            "train": self.train_log_ids,
            "test": self.test_log_ids,
        }


def split_log_ids(cells: Dict[str, Tuple], holdout_per_cell: int, seed: int) -> Dict[str, List[str]]:
    """
    Choose the held-out logs of every (task, operator) cell.

    Args:
        cells: log_id -> (task, operator)
        holdout_per_cell: whole exercises held out per cell
        seed: seed of the draw

    Returns:
        "Task/Operator" -> sorted held-out log ids
    """
    by_cell: Dict[Tuple[str, str], List[str]] = defaultdict(list)
    for log_id, (task, operator) in cells.items():
        by_cell[(parse_task(task).value, parse_operator(operator).value)].append(log_id)

    holdout = {}
    for (task, operator), ids in sorted(by_cell.items()):
        ids = sorted(ids)
        if len(ids) <= holdout_per_cell:
            raise InputError(
                f"cell {task}/{operator} has {len(ids)} logs; holding out {holdout_per_cell} needs more"
            )
        picked = make_rng(seed, "split", task, operator).choice(len(ids), size=holdout_per_cell, replace=False)
        holdout[f"{task}/{operator}"] = sorted(ids[i] for i in picked)
    return holdout


def partition(windows: Iterable[EventWindow], holdout: Dict[str, List[str]], seed: int = 0) -> DatasetSplit:
    """Send every window of a held-out log to test, all others to train."""
    held = {log_id for ids in holdout.values() for log_id in ids}
    train, test = [], []
    for w in windows:
        (test if w.log_id in held else train).append(w)
    return DatasetSplit(train, test, holdout, seed)


def split_stratified(windows: Sequence[EventWindow], holdout_exercises_per_cell: int, seed: int) -> DatasetSplit:
    """Hold out whole exercises per (task, operator) cell by seeded draw."""
    cells = {w.log_id: (w.task, w.operator) for w in windows}
    holdout = split_log_ids(cells, holdout_exercises_per_cell, seed)
    split = partition(windows, holdout, seed)
    logger.info(
        f"Split {len(windows)} windows: train={len(split.train)} test={len(split.test)} "
        f"held-out logs={sum(len(v) for v in holdout.values())}"
    )
    return split
