"""Movement deltas, binary event encoding, windowing and the leak-free split."""

from kinspike.encoding.encoder import CorpusEncoder, EncodedCorpus
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
from kinspike.encoding.windows import DatasetSplit, EventWindow, split_stratified, stack_windows, window

__all__ = [
    "CorpusEncoder",
    "EncodedCorpus",
    "EventSequence",
    "MovementSequence",
    "Standardizer",
    "ThresholdVector",
    "calibrate_thresholds",
    "deltas",
    "encode_events",
    "nonzero_fraction",
    "sparsity",
    "DatasetSplit",
    "EventWindow",
    "split_stratified",
    "stack_windows",
    "window",
]
