#!/usr/bin/env python3
"""
Model Training and Evaluation
Mini-batch Adam training with best-test checkpointing and early stopping,
plus per-window and per-exercise evaluation.
"""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from kinspike.encoding.windows import DatasetSplit, EventWindow, stack_windows
from kinspike.errors import InputError, TrainingError
from kinspike.ingestion.schema import OPERATORS, TASKS
from kinspike.nets.layers import Params
from kinspike.nets.models import build, network_for, predict_batches
from kinspike.nets.optim import Adam
from kinspike.nets.spec import ModelSpec, TrainConfig
from kinspike.numcore.rng import make_rng

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_loss", "train_accuracy", "test_accuracy"]


def class_names(target: str) -> List[str]:
    if target == "task":
        return [t.value for t in TASKS]
    if target == "operator":
        return [o.value for o in OPERATORS]
    raise InputError(f"unknown prediction target: {target!r}")


@dataclass
class TrainHistory:
    epoch: List[int] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    train_accuracy: List[float] = field(default_factory=list)
    test_accuracy: List[float] = field(default_factory=list)

    def append(self, epoch: int, loss: float, train_acc: float, test_acc: float):
        self.epoch.append(epoch)
        self.train_loss.append(loss)
        self.train_accuracy.append(train_acc)
        self.test_accuracy.append(test_acc)

    def __len__(self) -> int:
        return len(self.epoch)

    @property
    def best_epoch(self) -> int:
        return self.epoch[int(np.argmax(self.test_accuracy))]

    @property
    def best_test_accuracy(self) -> float:
        return float(max(self.test_accuracy))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({c: getattr(self, c) for c in HISTORY_COLUMNS}, columns=HISTORY_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "TrainHistory":
        return cls(*[frame[c].tolist() for c in HISTORY_COLUMNS])


@dataclass(frozen=True, eq=False)
class EvalResult:
    accuracy: float
    predictions: np.ndarray
    labels: np.ndarray
    probs: np.ndarray
    exercise_accuracy: float
    classes: Tuple[str, ...]


def argmax_lowest(probs: np.ndarray) -> np.ndarray:
    """Row argmax; numpy already breaks ties toward the lowest index."""
    return np.argmax(probs, axis=1)


def majority_vote(predictions: Sequence[int], groups: Sequence[str]) -> Dict[str, int]:
    """Per-group most frequent prediction, ties broken by the lowest class index."""
    votes: Dict[str, Counter] = defaultdict(Counter)
    for pred, group in zip(predictions, groups):
        votes[group][int(pred)] += 1
    return {g: min(c, key=lambda k: (-c[k], k)) for g, c in votes.items()}


def accuracy_of(predictions: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.asarray(predictions) == np.asarray(labels)))


def evaluate(spec: ModelSpec, params: Params, windows: Sequence[EventWindow], target: str = "task") -> EvalResult:
    """Per-window accuracy plus per-exercise majority-vote accuracy."""
    if not windows:
        raise InputError("cannot evaluate on an empty window set")
    classes = class_names(target)
    x, y = stack_windows(windows, target, classes)
    probs = predict_batches(spec, params, x).probs
    preds = argmax_lowest(probs)
    return summarize_predictions(preds, y, probs, windows, classes)


def summarize_predictions(preds, y, probs, windows, classes) -> EvalResult:
    log_ids = [w.log_id for w in windows]
    voted = majority_vote(preds, log_ids)
    truth = {w.log_id: int(label) for w, label in zip(windows, y)}
    exercise_acc = float(np.mean([voted[g] == truth[g] for g in sorted(voted)]))
    return EvalResult(accuracy_of(preds, y), preds, y, probs, exercise_acc, tuple(classes))


def train(
    spec: ModelSpec,
    split: DatasetSplit,
    cfg: TrainConfig,
    target: str = "task",
    params: Optional[Params] = None,
) -> Tuple[Params, TrainHistory]:
    """
    Train with Adam, keeping the parameters of the best test-accuracy epoch.

    Training stops after ``cfg.max_epochs`` or once test accuracy has not
    improved for ``cfg.patience`` epochs.

    Raises:
        TrainingError: the loss became non-finite
    """
    if not split.train or not split.test:
        raise InputError("training needs nonempty train and test partitions")
    net = network_for(spec)
    classes = class_names(target)
    x_train, y_train = stack_windows(split.train, target, classes)
    x_test, y_test = stack_windows(split.test, target, classes)

    params = dict(params) if params is not None else build(spec, cfg.seed)
    optimizer = Adam.from_config(cfg)
    history = TrainHistory()
    best_params = {k: v.copy() for k, v in params.items()}
    best_acc = -1.0
    stale = 0

    logger.info(
        f"=== Starting Training: kind={spec.kind.value} target={target} "
        f"train={len(y_train)} test={len(y_test)} ==="
    )
    n = len(y_train)
    for epoch in tqdm(range(1, cfg.max_epochs + 1), desc=f"Training {spec.kind.value}", disable=None):
        order = make_rng(cfg.seed, "shuffle", epoch).permutation(n)
        dropout_rng = make_rng(cfg.seed, "dropout", epoch)
        total_loss = 0.0
        seen = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2 and spec.batchnorm:
                continue
            loss, grads, batch_stats = net.loss_and_grads(x_train[idx], y_train[idx], params, True, dropout_rng)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                logger.error(f"stage=train epoch={epoch} non-finite loss")
                raise TrainingError("training diverged: non-finite loss", epoch)
            optimizer.step(params, grads)
            for layer_name, (mean, var) in batch_stats.items():
                for stat, value in (("mean", mean), ("var", var)):
                    key = f"{layer_name}.{stat}"
                    params[key] = cfg.bn_momentum * params[key] + (1.0 - cfg.bn_momentum) * value
            total_loss += loss * len(idx)
            seen += len(idx)

        train_pred = argmax_lowest(predict_batches(spec, params, x_train).probs)
        correct = int(np.sum(train_pred == y_train))
        test_acc = accuracy_of(argmax_lowest(predict_batches(spec, params, x_test).probs), y_test)
        train_loss = total_loss / max(seen, 1)
        history.append(epoch, train_loss, correct / n, test_acc)
        logger.info(
            f"stage=train epoch={epoch} loss={train_loss:.4f} "
            f"train_acc={correct / n:.4f} test_acc={test_acc:.4f}"
        )

        if test_acc > best_acc:
            best_acc = test_acc
            best_params = {k: v.copy() for k, v in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info(f"stage=train early_stop epoch={epoch} best_test_acc={best_acc:.4f}")
                break

    logger.info(f"=== Training Complete: best_test_acc={best_acc:.4f} epochs={len(history)} ===")
    return best_params, history
