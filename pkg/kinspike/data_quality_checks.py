#!/usr/bin/env python3
"""
Data Quality Checks
Validates kinematic logs against the feature schema before they enter the pipeline.
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Iterable

import numpy as np

from kinspike.ingestion.schema import SCHEMA
from kinspike.ingestion.synthetic import MIN_FRAMES, KinematicLog

logger = logging.getLogger(__name__)


class LogQualityValidator:
    """Validates kinematic logs: schema width, finiteness and minimum length."""

    def __init__(self, min_frames: int = MIN_FRAMES):
        self.min_frames = min_frames

    def validate_log(self, log: KinematicLog) -> Dict:
        """Validate a single kinematic log."""
        frames = np.asarray(log.frames)
        total_rows = int(frames.shape[0]) if frames.ndim == 2 else 0
        total_columns = int(frames.shape[1]) if frames.ndim == 2 else 0
        non_finite = int(np.size(frames) - np.count_nonzero(np.isfinite(frames)))

        checks = {
            "schema_width": total_columns == SCHEMA.width,
            "finite_values": non_finite == 0,
            "min_frames": total_rows >= self.min_frames,
        }
        result = {
            "log_id": log.log_id,
            "task": log.task.value,
            "operator": log.operator.value,
            "basic_stats": {"total_rows": total_rows, "total_columns": total_columns},
            "data_quality": {"non_finite_values": non_finite, "checks": checks},
            "status": "PASSED" if all(checks.values()) else "FAILED",
        }
        if result["status"] != "PASSED":
            logger.warning(f"Log {log.log_id} failed validation: {checks}")
        return result

    def validate_corpus(self, logs: Iterable[KinematicLog]) -> Dict:
        """Validate every log and summarise the corpus."""
        results = [self.validate_log(log) for log in logs]
        passed = sum(1 for r in results if r["status"] == "PASSED")
        cells = sorted({(r["task"], r["operator"]) for r in results})

        logger.info(f"Validation completed: {passed}/{len(results)} logs passed, {len(cells)} cells")
        return {
            "dataset": "Kinematic Logs",
            "log_count": len(results),
            "passed": passed,
            "cells": len(cells),
            "logs": results,
            "status": "PASSED" if results and passed == len(results) else "FAILED",
        }

    def save_validation_results(self, results: Dict, output_path) -> Path:
        """Save validation results to a JSON file."""
        output_path = Path(output_path)
        os.makedirs(output_path.parent, exist_ok=True)
        with open(output_path, "w") as f:
            json.dump(results, f, indent=2, default=str)
            f.write("\n")
        logger.info(f"Validation results saved to: {output_path}")
        return output_path
