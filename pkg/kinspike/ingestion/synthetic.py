#!/usr/bin/env python3
"""
Synthetic Kinematic Log Generation
Produces labeled 30 Hz simulator-style recordings for every (task, operator) cell.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from kinspike.errors import InputError, NumericError
from kinspike.ingestion.schema import OPERATORS, SCHEMA, TASKS, OperatorId, TaskId, parse_operator, parse_task
from kinspike.ingestion.scripts import (
    PAUSE_FRAMES,
    SAMPLE_RATE_HZ,
    SEGMENT_JITTER,
    TaskScript,
    operator_style,
    task_script,
    tremor_gains,
)
from kinspike.numcore.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

DURATION_RANGE_S = (30.0, 180.0)
MIN_FRAMES = 41


@dataclass(frozen=True, eq=False)
class KinematicLog:
    """One exercise: T x 20 positional frames at 30 Hz plus its labels."""

    log_id: str
    task: TaskId
    operator: OperatorId
    frames: np.ndarray
    seed: int
    sample_rate_hz: int = SAMPLE_RATE_HZ

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])


def _route(script: TaskScript, style, n_frames: int, camera_motion: bool, rng) -> np.ndarray:
    """Piecewise-linear waypoint interpolation with speed scaling and pauses."""
    camera_cols = list(SCHEMA.groups["camera"])
    left_cols = list(SCHEMA.groups["left"])
    right_cols = list(SCHEMA.groups["right"])
    n_waypoints = script.camera_waypoints.shape[0]

    def target(k: int) -> np.ndarray:
        row = np.empty(SCHEMA.width)
        for arm, cols in (("left", left_cols), ("right", right_cols)):
            waypoint = script.waypoints[arm][k]
            spread = np.abs(waypoint - script.waypoints[arm].mean(axis=0))
            row[cols] = waypoint + 0.1 * spread * rng.standard_normal(waypoint.shape)
        row[camera_cols] = script.camera_waypoints[k] if camera_motion else script.camera_waypoints[0]
        return row

    current = target(0)
    pieces = [current[None, :]]
    total = 1
    k = 0
    while total < n_frames:
        k = (k + 1) % n_waypoints
        nxt = target(k)
        jitter = rng.uniform(1.0 - SEGMENT_JITTER, 1.0 + SEGMENT_JITTER)
        seg_len = max(2, int(round(script.segment_frames * jitter / style.speed_multiplier)))
        fractions = np.arange(1, seg_len + 1)[:, None] / seg_len
        pieces.append(current + (nxt - current) * fractions)
        total += seg_len
        if rng.random() < style.pause_probability:
            hold = int(rng.integers(PAUSE_FRAMES[0], PAUSE_FRAMES[1] + 1))
            pieces.append(np.repeat(nxt[None, :], hold, axis=0))
            total += hold
        current = nxt

    return np.concatenate(pieces, axis=0)[:n_frames]


def _moving_average(frames: np.ndarray, window: int) -> np.ndarray:
    """Valid-mode moving average along time (output is window - 1 rows shorter)."""
    if window == 1:
        return frames.copy()
    views = np.lib.stride_tricks.sliding_window_view(frames, window, axis=0)
    return views.mean(axis=-1)


def generate_log(
    task,
    operator,
    duration_s: float,
    seed: int,
    camera_motion: bool = False,
    log_id: Optional[str] = None,
) -> KinematicLog:
    """
    Synthesize one exercise recording.

    Args:
        task: exercise identifier
        operator: operator identifier (selects the motion style preset)
        duration_s: recording length in seconds (>= 2)
        seed: seed of the log's random stream
        camera_motion: let camera-moving exercises move the camera
        log_id: identifier recorded in the log (derived from labels and seed if omitted)

    Returns:
        KinematicLog with round(duration_s * 30) frames
    """
    task = parse_task(task)
    operator = parse_operator(operator)
    if not duration_s >= 2.0:
        raise InputError(f"duration_s must be >= 2, got {duration_s}")

    script = task_script(task)
    style = operator_style(operator)
    moving_camera = bool(camera_motion and script.camera_motion)
    n_frames = int(round(duration_s * SAMPLE_RATE_HZ))
    window = int(style.smoothing_window)
    n_raw = n_frames + window - 1
    rng = make_rng(seed, "log", task.value, operator.value)

    raw = _route(script, style, n_raw, moving_camera, rng)

    gains = np.zeros(SCHEMA.width)
    for arm in ("left", "right"):
        gains[list(SCHEMA.groups[arm])] = tremor_gains()

    t = np.arange(n_raw)[:, None] / SAMPLE_RATE_HZ
    phase = rng.uniform(0.0, 2.0 * np.pi, size=SCHEMA.width)
    tremor = style.tremor_amplitude * np.sin(2.0 * np.pi * style.tremor_frequency_hz * t + phase)
    jitter = style.jitter_std * rng.standard_normal(raw.shape)
    frames = _moving_average(raw + gains * (tremor + jitter), window)

    if not moving_camera:
        camera_cols = list(SCHEMA.groups["camera"])
        frames[:, camera_cols] = script.camera_waypoints[0]

    if not np.all(np.isfinite(frames)):
        raise NumericError(f"non-finite frames generated for seed {seed}")

    return KinematicLog(
        log_id=log_id or f"{task.value}_{operator.value}_{seed}",
        task=task,
        operator=operator,
        frames=frames,
        seed=int(seed),
    )


def _cell_jobs(reps_per_cell: int, base_seed: int, duration_range: Tuple[float, float]) -> List[Dict]:
    jobs = []
    for task in TASKS:
        for operator in OPERATORS:
            for rep in range(reps_per_cell):
                draw = make_rng(base_seed, "duration", task.value, operator.value, rep)
                jobs.append({
                    "task": task,
                    "operator": operator,
                    "duration_s": float(draw.uniform(*duration_range)),
                    "seed": derive_seed(base_seed, "log", task.value, operator.value, rep),
                    "log_id": f"{task.value}_{operator.value}_{rep:02d}",
                })
    return jobs


def _run_job(job: Dict, camera_motion: bool) -> KinematicLog:
    return generate_log(camera_motion=camera_motion, **job)


def generate_dataset(
    reps_per_cell: int,
    base_seed: int,
    duration_range: Tuple[float, float] = DURATION_RANGE_S,
    camera_motion: bool = False,
    jobs: int = 1,
) -> Tuple[List[KinematicLog], List[Dict]]:
    """
    Generate reps_per_cell logs for each of the 16 (task, operator) cells.

    Returns:
        (logs, manifest) where manifest rows are {path, task, operator, seed, frames}
    """
    if reps_per_cell < 2:
        raise InputError(f"reps_per_cell must be >= 2, got {reps_per_cell}")
    low, high = duration_range
    if not 2.0 <= low <= high:
        raise InputError(f"invalid duration range {duration_range}")

    specs = _cell_jobs(reps_per_cell, base_seed, (low, high))
    logger.info(f"Generating {len(specs)} logs ({reps_per_cell} per cell, base seed {base_seed})")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_job, spec, camera_motion) for spec in specs]
            logs = [f.result() for f in tqdm(futures, desc="Generating logs", disable=None)]
    else:
        logs = [_run_job(spec, camera_motion) for spec in tqdm(specs, desc="Generating logs", disable=None)]

    manifest = [
        {
            "path": f"logs/{log.log_id}.csv",
            "task": log.task.value,
            "operator": log.operator.value,
            "seed": log.seed,
            "frames": log.n_frames,
        }
        for log in logs
    ]
    return logs, manifest


class KinematicLogGenerator:
    """Generates the synthetic corpus and stores it as log CSVs plus a manifest."""

    def __init__(self, reps_per_cell: int = 8, base_seed: int = 42,
                 duration_range: Tuple[float, float] = DURATION_RANGE_S,
                 camera_motion: bool = False, jobs: int = 1):
        self.reps_per_cell = reps_per_cell
        self.base_seed = base_seed
        self.duration_range = duration_range
        self.camera_motion = camera_motion
        self.jobs = jobs

    def run_generation_pipeline(self, output_dir) -> Dict:
        """Generate, validate and store the corpus under output_dir."""
        from kinspike.data_quality_checks import LogQualityValidator
        from kinspike.ingestion.storage import write_log_csv, write_manifest

        logger.info("=== Starting Synthetic Log Generation Pipeline ===")
        output_dir = Path(output_dir)

        logs, manifest = generate_dataset(
            self.reps_per_cell, self.base_seed, self.duration_range, self.camera_motion, self.jobs
        )

        validator = LogQualityValidator()
        report = validator.validate_corpus(logs)
        if report["status"] != "PASSED":
            failed = [r["log_id"] for r in report["logs"] if r["status"] != "PASSED"]
            raise NumericError(f"generated logs failed validation: {failed}")

        for log, row in zip(logs, manifest):
            write_log_csv(log, output_dir / row["path"])
        manifest_path = write_manifest(manifest, output_dir / "manifest.json")

        logger.info(f"Stored {len(logs)} logs, manifest at {manifest_path}")
        logger.info("=== Synthetic Log Generation Pipeline Complete ===")
        return {"manifest": str(manifest_path), "log_count": len(logs), "validation": report}
