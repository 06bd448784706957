#!/usr/bin/env python3
"""
Error Types
Exception hierarchy shared by every pipeline stage, with CLI exit codes.
"""


class KinspikeError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class SchemaError(KinspikeError):
    """Shape, dimension or identifier does not match the expected schema."""

    exit_code = 5


class InputError(KinspikeError):
    """Argument values outside the accepted domain (empty corpus, short log...)."""

    exit_code = 5


class NumericError(KinspikeError):
    """A computation produced non-finite values."""

    exit_code = 4


class TrainingError(NumericError):
    """Training diverged."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class FormatError(KinspikeError):
    """A stored artifact is corrupt, truncated or of an unsupported version."""

    exit_code = 6


class ConversionError(KinspikeError):
    """A layer cannot be converted to a spiking equivalent."""

    exit_code = 5

    def __init__(self, layer: str, reason: str = "unsupported layer"):
        super().__init__(f"cannot convert layer '{layer}': {reason}")
        self.layer = layer


class ConfigError(KinspikeError):
    """Invalid run configuration."""

    exit_code = 2


class DependencyError(KinspikeError):
    """An upstream artifact is missing."""

    exit_code = 3

    def __init__(self, artifact: str, command: str):
        super().__init__(f"missing {artifact}; run '{command}' first")
        self.artifact = artifact
        self.command = command
