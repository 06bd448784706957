"""
Kinematic feature schema.

The 20 simulator features in their fixed column order, grouped by instrument,
with the per-feature mean absolute movement observed between subsequent
timesteps in a reference recording (simulator units per step).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from kinspike.errors import SchemaError


class TaskId(str, Enum):
    PICK_AND_PLACE = "PickAndPlace"
    PEG_BOARD = "PegBoard"
    THREAD_THE_RINGS = "ThreadTheRings"
    RING_AND_RAIL = "RingAndRail"


class OperatorId(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


TASKS: Tuple[TaskId, ...] = tuple(TaskId)
OPERATORS: Tuple[OperatorId, ...] = tuple(OperatorId)


def parse_task(value) -> TaskId:
    try:
        return value if isinstance(value, TaskId) else TaskId(str(value))
    except ValueError:
        raise SchemaError(f"unknown task id: {value!r}") from None


def parse_operator(value) -> OperatorId:
    try:
        return value if isinstance(value, OperatorId) else OperatorId(str(value))
    except ValueError:
        raise SchemaError(f"unknown operator id: {value!r}") from None


# Component order of an arm vector and of a camera vector.
ARM_AXES = ("X", "Y", "Z", "Pitch", "Roll", "Yaw", "Jaw Opening Angle")
CAMERA_AXES = ("X", "Y", "Z", "Pitch", "Roll", "Yaw")
ROTATION_AXES = ("Pitch", "Roll", "Yaw")

FEATURE_NAMES: Tuple[str, ...] = (
    "Tool Camera Pitch",
    "Tool Camera Roll",
    "Tool Camera X",
    "Tool Camera Y",
    "Tool Camera Yaw",
    "Tool Camera Z",
    "Tool Left Jaw Opening Angle",
    "Tool Left Pitch",
    "Tool Left Roll",
    "Tool Left X",
    "Tool Left Y",
    "Tool Left Yaw",
    "Tool Left Z",
    "Tool Right Jaw Opening Angle",
    "Tool Right Pitch",
    "Tool Right Roll",
    "Tool Right X",
    "Tool Right Y",
    "Tool Right Yaw",
    "Tool Right Z",
)

# None marks a value missing from the reference table (Tool Left Pitch).
REFERENCE_MEAN_MOVEMENT: Tuple[Optional[float], ...] = (
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    0.003162, None, 0.003628, 0.015099, 0.014671, 0.003408, 0.020905,
    0.001955, 0.002691, 0.004513, 0.016174, 0.017899, 0.002792, 0.019928,
)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names, instrument groups and reference movement."""

    names: Tuple[str, ...] = FEATURE_NAMES
    reference_mean_movement: Tuple[Optional[float], ...] = REFERENCE_MEAN_MOVEMENT
    groups: Dict[str, Tuple[int, ...]] = field(init=False, default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.names) != 20 or len(set(self.names)) != 20:
            raise SchemaError("feature schema needs exactly 20 unique names")
        if len(self.reference_mean_movement) != 20:
            raise SchemaError("reference movement must have 20 entries")
        groups = {
            "camera": self._columns("Tool Camera", CAMERA_AXES),
            "left": self._columns("Tool Left", ARM_AXES),
            "right": self._columns("Tool Right", ARM_AXES),
        }
        object.__setattr__(self, "groups", groups)
        if any(self.reference_mean_movement[i] != 0.0 for i in groups["camera"]):
            raise SchemaError("camera reference movement must be 0")

    def _columns(self, prefix: str, axes) -> Tuple[int, ...]:
        return tuple(self.names.index(f"{prefix} {axis}") for axis in axes)

    @property
    def width(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature: {name!r}") from None

    def rotation_columns(self) -> Tuple[int, ...]:
        """Pitch/roll/yaw columns of both tool arms."""
        return tuple(
            self.index(f"Tool {arm} {axis}") for arm in ("Left", "Right") for axis in ROTATION_AXES
        )

    def calibration_target(self, column: int) -> float:
        """Reference movement for a column; a missing value borrows the other arm's."""
        value = self.reference_mean_movement[column]
        if value is not None:
            return value
        name = self.names[column]
        mirrored = name.replace("Left", "Right") if "Left" in name else name.replace("Right", "Left")
        return self.reference_mean_movement[self.index(mirrored)]


SCHEMA = FeatureSchema()
