"""Synthetic kinematic log generation (stands in for the private simulator recordings)."""

from kinspike.ingestion.schema import SCHEMA, FeatureSchema, OperatorId, TaskId
from kinspike.ingestion.scripts import OPERATOR_STYLES, OperatorStyle, TaskScript, task_script
from kinspike.ingestion.synthetic import KinematicLog, KinematicLogGenerator, generate_dataset, generate_log

__all__ = [
    "SCHEMA",
    "FeatureSchema",
    "OperatorId",
    "TaskId",
    "OPERATOR_STYLES",
    "OperatorStyle",
    "TaskScript",
    "task_script",
    "KinematicLog",
    "KinematicLogGenerator",
    "generate_dataset",
    "generate_log",
]
