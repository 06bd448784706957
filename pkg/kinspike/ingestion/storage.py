"""
Log CSV and manifest persistence.

Log CSVs carry the 20 feature names as header and one row per frame; the
manifest is a JSON array of {path, task, operator, seed, frames}.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

from kinspike.errors import DependencyError, FormatError, SchemaError
from kinspike.ingestion.schema import SCHEMA, parse_operator, parse_task
from kinspike.ingestion.synthetic import KinematicLog

logger = logging.getLogger(__name__)


def write_frame_csv(matrix: np.ndarray, path, columns=SCHEMA.names) -> Path:
    """Write a (rows x features) matrix under a feature-name header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(matrix, columns=list(columns)).to_csv(path, index=False, lineterminator="\n")
    return path


def read_frame_csv(path, columns=SCHEMA.names) -> np.ndarray:
    path = Path(path)
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    if tuple(df.columns) != tuple(columns):
        raise SchemaError(f"{path}: header does not match the feature schema")
    return df.to_numpy(dtype=np.float64)


def write_log_csv(log: KinematicLog, path) -> Path:
    return write_frame_csv(log.frames, path)


def write_manifest(manifest: List[Dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return path


def read_manifest(path) -> List[Dict]:
    path = Path(path)
    if not path.exists():
        raise DependencyError(str(path), "gen")
    try:
        with open(path) as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"corrupt manifest {path}: {e}") from e
    return manifest


def load_corpus(output_dir) -> List[KinematicLog]:
    """Load every log listed in <output_dir>/manifest.json."""
    output_dir = Path(output_dir)
    manifest = read_manifest(output_dir / "manifest.json")
    logs = []
    for row in manifest:
        frames = read_frame_csv(output_dir / row["path"])
        if frames.shape[0] != row["frames"]:
            raise FormatError(f"{row['path']}: expected {row['frames']} frames, found {frames.shape[0]}")
        logs.append(KinematicLog(
            log_id=Path(row["path"]).stem,
            task=parse_task(row["task"]),
            operator=parse_operator(row["operator"]),
            frames=frames,
            seed=int(row["seed"]),
        ))
    logger.info(f"Loaded {len(logs)} logs from {output_dir}")
    return logs
