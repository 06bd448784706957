#!/usr/bin/env python3
"""
Corpus Encoding
Turns a corpus of kinematic logs into windowed model inputs with a leak-free split.

The held-out exercises are drawn first; thresholds and the raw-mode
standardization are then calibrated on the training logs only.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from kinspike.encoding.movement import (
    EventSequence,
    MovementSequence,
    Standardizer,
    ThresholdVector,
    calibrate_thresholds,
    deltas,
    encode_events,
    nonzero_fraction,
    sparsity,
)
from kinspike.encoding.storage import (
    events_path,
    holdout_ids,
    read_events_csv,
    read_split,
    read_standardization,
    write_events_csv,
    write_split,
    write_standardization,
    write_thresholds,
)
from kinspike.encoding.windows import DatasetSplit, partition, split_log_ids, window
from kinspike.errors import InputError, SchemaError
from kinspike.ingestion.synthetic import KinematicLog

logger = logging.getLogger(__name__)

MODES = ("event", "raw")


@dataclass(frozen=True, eq=False)
class EncodedCorpus:
    split: DatasetSplit
    thresholds: ThresholdVector
    standardizer: Standardizer
    events: Dict[str, EventSequence]
    mode: str
    names: tuple
    event_sparsity: float
    raw_nonzero_fraction: float


class CorpusEncoder:
    """Encodes a log corpus into train/test windows."""

    def __init__(self, mode: str = "event", fraction: float = 0.5, window_length: int = 40,
                 stride: int = 20, holdout_per_cell: int = 2, split_seed: int = 42):
        if mode not in MODES:
            raise SchemaError(f"unknown encoding mode: {mode!r}")
        self.mode = mode
        self.fraction = fraction
        self.window_length = window_length
        self.stride = stride
        self.holdout_per_cell = holdout_per_cell
        self.split_seed = split_seed

    @classmethod
    def from_config(cls, cfg, mode: Optional[str] = None) -> "CorpusEncoder":
        return cls(mode or cfg.mode, cfg.fraction, cfg.window_length, cfg.stride,
                   cfg.holdout_per_cell, cfg.split_seed)

    def holdout(self, logs: Sequence[KinematicLog]) -> Dict[str, List[str]]:
        return split_log_ids({log.log_id: (log.task, log.operator) for log in logs},
                             self.holdout_per_cell, self.split_seed)

    def _movements(self, logs, drop_feature: Optional[int]) -> List[MovementSequence]:
        movements = [deltas(log) for log in logs]
        if drop_feature is not None:
            movements = [m.without_feature(drop_feature) for m in movements]
        return movements

    def encode(self, logs: Sequence[KinematicLog], drop_feature: Optional[int] = None) -> EncodedCorpus:
        """
        Encode a corpus.

        Args:
            logs: kinematic logs with task/operator labels
            drop_feature: column removed before windowing (leave-one-feature-out)

        Returns:
            EncodedCorpus with the split in the configured mode
        """
        if not logs:
            raise InputError("cannot encode an empty corpus")
        holdout = self.holdout(logs)
        held = {log_id for ids in holdout.values() for log_id in ids}

        movements = self._movements(logs, drop_feature)
        train_movements = [m for m in movements if m.log_id not in held]
        thresholds = calibrate_thresholds(train_movements, self.fraction)
        standardizer = Standardizer.fit(train_movements)

        events = {m.log_id: encode_events(m, thresholds) for m in movements}
        windows = []
        for log, m in zip(logs, movements):
            inputs = events[m.log_id].events if self.mode == "event" else standardizer.transform(m)
            windows.extend(window(inputs, self.window_length, self.stride, labels=(log.task, log.operator, log.log_id)))

        split = partition(windows, holdout, self.split_seed)
        if not split.train or not split.test:
            raise InputError("encoding produced an empty train or test partition")

        event_sparsity = float(np.mean([sparsity(e) for e in events.values()]))
        raw_fraction = float(np.mean([nonzero_fraction(m) for m in movements]))
        logger.info(
            f"stage=encode mode={self.mode} windows={len(windows)} train={len(split.train)} "
            f"test={len(split.test)} sparsity={event_sparsity:.4f} raw_nonzero={raw_fraction:.4f}"
        )
        return EncodedCorpus(split, thresholds, standardizer, events, self.mode, movements[0].names,
                             event_sparsity, raw_fraction)

    def run_encoding_pipeline(self, logs: Sequence[KinematicLog], output_dir) -> Dict:
        """Encode the corpus and store events, thresholds, split and standardization."""
        logger.info("=== Starting Event Encoding Pipeline ===")
        output_dir = Path(output_dir)
        corpus = self.encode(logs)

        for log_id, seq in tqdm(sorted(corpus.events.items()), desc="Writing events", disable=None):
            write_events_csv(seq, events_path(output_dir, log_id))
        write_thresholds(corpus.thresholds, output_dir)
        write_split(corpus.split, output_dir)
        write_standardization(corpus.standardizer, output_dir)

        logger.info("=== Event Encoding Pipeline Complete ===")
        return {
            "mode": corpus.mode,
            "train_windows": len(corpus.split.train),
            "test_windows": len(corpus.split.test),
            "event_sparsity": corpus.event_sparsity,
            "raw_nonzero_fraction": corpus.raw_nonzero_fraction,
        }

    def load_split(self, logs: Sequence[KinematicLog], output_dir) -> DatasetSplit:
        """Rebuild the windowed split from stored encoding artifacts."""
        output_dir = Path(output_dir)
        record = read_split(output_dir)
        holdout = holdout_ids(record)
        standardizer = read_standardization(output_dir) if self.mode == "raw" else None

        windows = []
        for log in logs:
            if self.mode == "event":
                inputs = read_events_csv(events_path(output_dir, log.log_id), log.log_id).events
            else:
                inputs = standardizer.transform(deltas(log))
            windows.extend(window(inputs, self.window_length, self.stride, labels=(log.task, log.operator, log.log_id)))
        return partition(windows, holdout, int(record.get("seed", self.split_seed)))
