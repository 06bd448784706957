"""
Scripted exercises and operator styles.

A TaskScript is a fixed cyclic route of waypoints for each instrument. Its
amplitudes are calibrated so that, averaged over the operator presets, the
per-step movement of every channel lands on the reference movement table
scaled by the task's emphasis on that channel.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

from kinspike.errors import SchemaError
from kinspike.ingestion.schema import (
    ARM_AXES,
    OPERATORS,
    ROTATION_AXES,
    SCHEMA,
    OperatorId,
    TaskId,
    parse_operator,
    parse_task,
)
from kinspike.numcore.rng import make_rng

SAMPLE_RATE_HZ = 30
N_WAYPOINTS = 8
PAUSE_FRAMES = (10, 30)
SEGMENT_JITTER = 0.15
SCRIPT_SEED = 20200601

# Fraction of an operator's tremor/jitter that reaches each arm component.
TREMOR_GAIN = {"X": 1.0, "Y": 1.0, "Z": 1.0, "Pitch": 0.03, "Roll": 0.03, "Yaw": 0.03, "Jaw Opening Angle": 0.1}

CAMERA_STEP = {"X": 0.004, "Y": 0.004, "Z": 0.004, "Pitch": 0.002, "Roll": 0.002, "Yaw": 0.002}


@dataclass(frozen=True)
class OperatorStyle:
    """Motion signature of one operator."""

    speed_multiplier: float
    tremor_amplitude: float
    tremor_frequency_hz: float
    pause_probability: float
    smoothing_window: int
    jitter_std: float

    def __post_init__(self):
        if self.speed_multiplier <= 0:
            raise SchemaError("speed_multiplier must be positive")
        if self.tremor_amplitude < 0 or self.jitter_std < 0:
            raise SchemaError("tremor_amplitude and jitter_std must be nonnegative")
        if self.tremor_frequency_hz <= 0:
            raise SchemaError("tremor_frequency_hz must be positive")
        if not 0.0 <= self.pause_probability <= 1.0:
            raise SchemaError("pause_probability must lie in [0, 1]")
        if int(self.smoothing_window) != self.smoothing_window or self.smoothing_window < 1:
            raise SchemaError("smoothing_window must be a positive integer")


# Operator A is the steadiest hand: smallest tremor, longest smoothing.
OPERATOR_STYLES: Dict[OperatorId, OperatorStyle] = {
    OperatorId.A: OperatorStyle(1.00, 0.0005, 6.0, 0.10, 5, 0.0002),
    OperatorId.B: OperatorStyle(1.30, 0.0030, 5.0, 0.25, 3, 0.0006),
    OperatorId.C: OperatorStyle(0.75, 0.0040, 4.0, 0.05, 2, 0.0010),
    OperatorId.D: OperatorStyle(1.60, 0.0060, 9.0, 0.35, 1, 0.0015),
}


def operator_style(operator) -> OperatorStyle:
    return OPERATOR_STYLES[parse_operator(operator)]


@dataclass(frozen=True)
class _TaskProfile:
    translation_gain: Tuple[float, float, float]
    rotation_intensity: float
    arm_rotation_bias: Tuple[float, float]
    jaw_gain: float
    segment_frames: int
    camera_motion: bool


# Rotation-heavy exercises carry the two largest intensities; Pick and Place
# requires almost no rotation.
_PROFILES: Dict[TaskId, _TaskProfile] = {
    TaskId.PICK_AND_PLACE: _TaskProfile((1.4, 1.4, 0.8), 0.0, (1.0, 1.0), 1.3, 30, False),
    TaskId.PEG_BOARD: _TaskProfile((0.8, 0.8, 1.6), 0.5, (1.0, 1.0), 1.2, 36, False),
    TaskId.THREAD_THE_RINGS: _TaskProfile((0.9, 0.9, 0.8), 1.8, (1.3, 0.7), 0.8, 45, True),
    TaskId.RING_AND_RAIL: _TaskProfile((0.9, 0.9, 0.8), 1.7, (0.8, 1.3), 0.7, 40, True),
}

_HOME = {
    "left": np.array([-0.30, 0.10, 0.20, 0.0, 0.0, 0.0, 0.40]),
    "right": np.array([0.30, 0.10, 0.20, 0.0, 0.0, 0.0, 0.40]),
    "camera": np.array([0.0, 0.50, 0.60, -0.30, 0.0, 0.0]),
}


@dataclass(frozen=True, eq=False)
class TaskScript:
    """Cyclic waypoint route of one scripted exercise."""

    task: TaskId
    waypoints: Dict[str, np.ndarray]
    camera_waypoints: np.ndarray
    rotation_intensity: float
    camera_motion: bool
    segment_frames: int


def frames_per_waypoint(segment_frames: int) -> float:
    """Mean frames spent per waypoint (travel plus pause), harmonically averaged over operators."""
    mean_pause = 0.5 * (PAUSE_FRAMES[0] + PAUSE_FRAMES[1])
    rates = [
        1.0 / (segment_frames / style.speed_multiplier + style.pause_probability * mean_pause)
        for style in OPERATOR_STYLES.values()
    ]
    return 1.0 / float(np.mean(rates))


def _unit_route(rng, n_components: int) -> np.ndarray:
    """Cyclic route in [-1, 1] whose mean absolute step is 1 per component."""
    route = rng.uniform(-1.0, 1.0, size=(N_WAYPOINTS, n_components))
    steps = np.abs(np.roll(route, -1, axis=0) - route).mean(axis=0)
    return route / steps


def _arm_gains(profile: _TaskProfile, arm: str) -> np.ndarray:
    bias = profile.arm_rotation_bias[0 if arm == "left" else 1]
    gains = []
    for axis in ARM_AXES:
        if axis in ROTATION_AXES:
            gains.append(profile.rotation_intensity * bias)
        elif axis == "Jaw Opening Angle":
            gains.append(profile.jaw_gain)
        else:
            gains.append(profile.translation_gain["XYZ".index(axis)])
    return np.array(gains)


@lru_cache(maxsize=None)
def task_script(task) -> TaskScript:
    """Build the fixed script of an exercise."""
    task = parse_task(task)
    profile = _PROFILES[task]
    rng = make_rng(SCRIPT_SEED, "script", task.value)
    travel = frames_per_waypoint(profile.segment_frames)

    waypoints = {}
    for arm in ("left", "right"):
        columns = SCHEMA.groups[arm]
        reference = np.array([SCHEMA.calibration_target(c) for c in columns])
        step = reference * _arm_gains(profile, arm) * travel
        waypoints[arm] = _HOME[arm] + _unit_route(rng, len(ARM_AXES)) * step

    camera_step = np.array([CAMERA_STEP[axis] for axis in ("X", "Y", "Z", "Pitch", "Roll", "Yaw")])
    camera = _HOME["camera"] + _unit_route(rng, 6) * camera_step * travel

    return TaskScript(
        task=task,
        waypoints=waypoints,
        camera_waypoints=camera,
        rotation_intensity=profile.rotation_intensity,
        camera_motion=profile.camera_motion,
        segment_frames=profile.segment_frames,
    )


def tremor_gains() -> np.ndarray:
    """Per-arm-component fraction of tremor and jitter, in ARM_AXES order."""
    return np.array([TREMOR_GAIN[axis] for axis in ARM_AXES])


__all__ = [
    "OPERATORS",
    "OPERATOR_STYLES",
    "OperatorStyle",
    "TaskScript",
    "frames_per_waypoint",
    "operator_style",
    "task_script",
    "tremor_gains",
]
