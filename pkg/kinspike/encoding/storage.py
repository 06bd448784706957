"""
Encoding artifacts: event CSVs, thresholds.json, split.json, standardization.json.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

from kinspike.encoding.movement import EventSequence, Standardizer, ThresholdVector
from kinspike.encoding.windows import DatasetSplit
from kinspike.errors import DependencyError, FormatError, SchemaError
from kinspike.ingestion.schema import SCHEMA

logger = logging.getLogger(__name__)

THRESHOLDS_FILE = "thresholds.json"
SPLIT_FILE = "split.json"
STANDARDIZATION_FILE = "standardization.json"
EVENTS_DIR = "events"


def write_json(data, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
        f.write("\n")
    return path


def read_json(path, command: str):
    """Read an upstream JSON artifact; a missing file names the command that writes it."""
    path = Path(path)
    if not path.exists():
        raise DependencyError(str(path), command)
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"corrupt {path.name}: {e}") from e


def write_events_csv(events: EventSequence, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(events.events.astype(np.int64), columns=list(events.names))
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_events_csv(path, log_id: str, names=SCHEMA.names) -> EventSequence:
    path = Path(path)
    if not path.exists():
        raise DependencyError(str(path), "encode")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    if tuple(frame.columns) != tuple(names):
        raise SchemaError(f"{path}: header does not match the feature schema")
    values = frame.to_numpy()
    if not np.isin(values, (0, 1)).all():
        raise FormatError(f"{path}: event values must be 0 or 1")
    return EventSequence(values.astype(np.uint8), log_id, None, tuple(names))


def write_thresholds(thresholds: ThresholdVector, output_dir) -> Path:
    return write_json(thresholds.to_dict(), Path(output_dir) / THRESHOLDS_FILE)


def read_thresholds(output_dir) -> ThresholdVector:
    return ThresholdVector.from_dict(read_json(Path(output_dir) / THRESHOLDS_FILE, "encode"))


def write_split(split: DatasetSplit, output_dir) -> Path:
    return write_json(split.to_dict(), Path(output_dir) / SPLIT_FILE)


def read_split(output_dir) -> Dict:
    data = read_json(Path(output_dir) / SPLIT_FILE, "encode")
    if not {"holdout", "train", "test"} <= set(data):
        raise FormatError("split.json lacks holdout/train/test")
    if set(data["train"]) & set(data["test"]):
        raise FormatError("split.json lists a log on both sides")
    return data


def write_standardization(standardizer: Standardizer, output_dir) -> Path:
    return write_json(standardizer.to_dict(), Path(output_dir) / STANDARDIZATION_FILE)


def read_standardization(output_dir) -> Standardizer:
    return Standardizer.from_dict(read_json(Path(output_dir) / STANDARDIZATION_FILE, "encode"))


def events_path(output_dir, log_id: str) -> Path:
    return Path(output_dir) / EVENTS_DIR / f"{log_id}.csv"


def holdout_ids(split_record: Dict) -> Dict[str, List[str]]:
    return {cell: list(ids) for cell, ids in split_record["holdout"].items()}
