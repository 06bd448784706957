#!/usr/bin/env python3
"""
Leave-One-Feature-Out Ablation
Retrains the model with one input feature removed (width 19) under identical
seeds and configuration, and records the drop in test accuracy.
"""

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from kinspike.encoding.encoder import CorpusEncoder
from kinspike.errors import InputError
from kinspike.ingestion.schema import SCHEMA
from kinspike.ingestion.synthetic import KinematicLog
from kinspike.nets.spec import ModelSpec, TrainConfig
from kinspike.nets.trainer import class_names, train

logger = logging.getLogger(__name__)

ABLATION_COLUMNS = [
    "feature_index", "feature", "baseline_accuracy", "ablated_accuracy", "delta", "kind", "target", "seeds",
]


@dataclass(frozen=True)
class AblationRow:
    feature_index: int
    feature: str
    baseline_accuracy: float
    ablated_accuracy: float
    delta: float
    kind: str
    target: str
    seeds: Tuple[int, ...]

    def to_dict(self) -> Dict:
        row = dataclasses.asdict(self)
        row["seeds"] = " ".join(str(s) for s in self.seeds)
        return row


@dataclass(frozen=True, eq=False)
class AblationReport:
    rows: List[AblationRow]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=ABLATION_COLUMNS)

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    def __len__(self) -> int:
        return len(self.rows)


def parse_features(value: str) -> List[int]:
    """'all', or a comma list of feature indices and/or feature names."""
    value = str(value).strip()
    if value == "all":
        return list(range(SCHEMA.width))
    indices = []
    for item in (v.strip() for v in value.split(",") if v.strip()):
        index = int(item) if item.isdigit() else SCHEMA.index(item)
        if not 0 <= index < SCHEMA.width:
            raise InputError(f"feature index {index} outside [0, {SCHEMA.width})")
        indices.append(index)
    if not indices:
        raise InputError("no features selected for ablation")
    return indices


def ablation_seeds(base_seed: int, count: int) -> Tuple[int, ...]:
    return tuple(base_seed + k for k in range(count))


def _seed_accuracies(job: Dict) -> List[float]:
    """Encode once with the feature dropped, then train once per seed."""
    encoder: CorpusEncoder = job["encoder"]
    corpus = encoder.encode(job["logs"], drop_feature=job["drop_feature"])
    width = corpus.split.train[0].x.shape[1]
    spec = dataclasses.replace(job["spec"], input_shape=(encoder.window_length, width))
    accuracies = []
    for seed in job["seeds"]:
        cfg = dataclasses.replace(job["train_config"], seed=seed)
        _, history = train(spec, corpus.split, cfg, job["target"])
        accuracies.append(history.best_test_accuracy)
    return accuracies


def _run_jobs(jobs: List[Dict], workers: int) -> List[List[float]]:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_seed_accuracies, job) for job in jobs]
            return [f.result() for f in tqdm(futures, desc="Ablation", disable=None)]
    return [_seed_accuracies(job) for job in tqdm(jobs, desc="Ablation", disable=None)]


def _job(logs, drop_feature, encoder, spec, train_config, seeds, target) -> Dict:
    return {
        "logs": logs,
        "drop_feature": drop_feature,
        "encoder": encoder,
        "spec": spec,
        "train_config": train_config,
        "seeds": seeds,
        "target": target,
    }


def _row(feature_index: int, baseline: float, accuracies: Sequence[float], spec: ModelSpec,
         target: str, seeds: Tuple[int, ...]) -> AblationRow:
    ablated = float(np.mean(accuracies))
    return AblationRow(
        feature_index=feature_index,
        feature=SCHEMA.names[feature_index],
        baseline_accuracy=baseline,
        ablated_accuracy=ablated,
        delta=baseline - ablated,
        kind=spec.kind.value,
        target=target,
        seeds=seeds,
    )


def ablate(
    logs: Sequence[KinematicLog],
    feature_index: int,
    spec: ModelSpec,
    train_config: TrainConfig,
    encoder: CorpusEncoder,
    seeds: Sequence[int] = (42,),
    target: str = "task",
    baseline: Optional[float] = None,
) -> AblationRow:
    """
    One ablation row: mean test accuracy over ``seeds`` with and without the feature.

    Args:
        logs: full corpus
        feature_index: column in [0, 20) to remove before windowing
        spec: architecture at full width; the ablated run uses width 19
        train_config: identical for both runs apart from the seed
        encoder: encoding settings (mode, fraction, window, split)
        seeds: training seeds averaged over
        target: "task" or "operator"
        baseline: precomputed full-width mean accuracy for the same seeds
    """
    if not 0 <= feature_index < SCHEMA.width:
        raise InputError(f"feature_index must lie in [0, {SCHEMA.width}), got {feature_index}")
    class_names(target)
    seeds = tuple(int(s) for s in seeds)
    logs = list(logs)
    if baseline is None:
        baseline = float(np.mean(_seed_accuracies(_job(logs, None, encoder, spec, train_config, seeds, target))))
    accuracies = _seed_accuracies(_job(logs, feature_index, encoder, spec, train_config, seeds, target))
    row = _row(feature_index, baseline, accuracies, spec, target, seeds)
    logger.info(f"stage=ablate feature={row.feature!r} baseline={baseline:.4f} ablated={row.ablated_accuracy:.4f} delta={row.delta:+.4f}")
    return row


def ablation_sweep(
    logs: Sequence[KinematicLog],
    spec: ModelSpec,
    train_config: TrainConfig,
    encoder: CorpusEncoder,
    seeds: Sequence[int] = (42, 43, 44),
    target: str = "task",
    features: Optional[Sequence[int]] = None,
    jobs: int = 1,
) -> AblationReport:
    """
    Ablate each feature in turn (all 20 by default).

    Rows are independent; with ``jobs > 1`` they run in worker processes and
    are combined in feature order.
    """
    features = list(range(SCHEMA.width)) if features is None else [int(f) for f in features]
    for index in features:
        if not 0 <= index < SCHEMA.width:
            raise InputError(f"feature_index must lie in [0, {SCHEMA.width}), got {index}")
    class_names(target)
    seeds = tuple(int(s) for s in seeds)
    logs = list(logs)

    logger.info(
        f"=== Starting Ablation Sweep: kind={spec.kind.value} target={target} "
        f"features={len(features)} seeds={list(seeds)} ==="
    )
    work = [_job(logs, None, encoder, spec, train_config, seeds, target)]
    work += [_job(logs, index, encoder, spec, train_config, seeds, target) for index in features]
    results = _run_jobs(work, jobs)

    baseline = float(np.mean(results[0]))
    rows = [_row(index, baseline, acc, spec, target, seeds) for index, acc in zip(features, results[1:])]
    for row in rows:
        logger.info(f"stage=ablate feature={row.feature!r} delta={row.delta:+.4f}")
    logger.info(f"=== Ablation Sweep Complete: baseline={baseline:.4f} rows={len(rows)} ===")
    return AblationReport(rows)
