#!/usr/bin/env python3
"""
Run Configuration Loader
Reads the sectioned key=value run file, applies dotted overrides and the
output-directory environment override, and writes the configuration back.
"""

import configparser
import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional

from dotenv import load_dotenv

from kinspike.errors import ConfigError, KinspikeError
from kinspike.nets.spec import ModelKind, TrainConfig

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "KINSPIKE_OUTPUT_DIR"

TARGETS = ("task", "operator")
ENCODING_MODES = ("event", "raw")
NEURON_KINDS = ("SpikingRectifiedLinear", "LIF")
TSNE_INITS = ("random", "pca")


@dataclass(frozen=True)
class DatasetConfig:
    reps_per_cell: int = 8
    seed: int = 42
    duration_min: float = 30.0
    duration_max: float = 180.0
    camera_motion: bool = False

    def validate(self):
        _require(self.reps_per_cell >= 2, "dataset.reps_per_cell", "must be >= 2")
        _require(2.0 <= self.duration_min <= self.duration_max, "dataset.duration_min",
                 "needs 2 <= duration_min <= duration_max")


@dataclass(frozen=True)
class EncodingConfig:
    mode: str = "event"
    fraction: float = 0.5
    window_length: int = 40
    stride: int = 20
    holdout_per_cell: int = 2
    split_seed: int = 42

    def validate(self):
        _require(self.mode in ENCODING_MODES, "encoding.mode", f"must be one of {ENCODING_MODES}")
        _require(self.fraction > 0, "encoding.fraction", "must be positive")
        _require(self.window_length >= 1, "encoding.window_length", "must be >= 1")
        _require(self.stride >= 1, "encoding.stride", "must be >= 1")
        _require(self.holdout_per_cell >= 1, "encoding.holdout_per_cell", "must be >= 1")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "LSTM"
    target: str = "task"
    dropout_rate: float = 0.2
    batchnorm: bool = True

    def validate(self):
        _require(self.kind in [k.value for k in ModelKind], "model.kind", "must be LSTM, CNN or FCN")
        _require(self.target in TARGETS, "model.target", f"must be one of {TARGETS}")
        _require(0.0 <= self.dropout_rate < 1.0, "model.dropout_rate", "must lie in [0, 1)")


@dataclass(frozen=True)
class SnnConfig:
    neuron: str = "SpikingRectifiedLinear"
    steps: int = 200
    dt: float = 0.001
    input_gain: float = 1.0
    amplitude: float = 1.0
    tau_rc: float = 0.02
    tau_ref: float = 0.002
    calibration_percentile: float = 99.9
    trace: bool = False

    def validate(self):
        _require(self.neuron in NEURON_KINDS, "snn.neuron", f"must be one of {NEURON_KINDS}")
        _require(self.steps >= 1, "snn.steps", "must be >= 1")
        _require(self.dt > 0, "snn.dt", "must be positive")
        _require(self.amplitude > 0, "snn.amplitude", "must be positive")
        _require(self.tau_rc > 0 and self.tau_ref > 0, "snn.tau_rc", "LIF time constants must be positive")
        _require(0.0 < self.calibration_percentile <= 100.0, "snn.calibration_percentile", "must lie in (0, 100]")


@dataclass(frozen=True)
class AnalysisConfig:
    perplexity: float = 30.0
    tsne_iters: int = 1000
    tsne_seed: int = 42
    tsne_init: str = "random"
    embed_include_train: bool = False
    max_points: int = 5000

    def validate(self):
        _require(self.perplexity > 0, "analysis.perplexity", "must be positive")
        _require(self.tsne_iters >= 1, "analysis.tsne_iters", "must be >= 1")
        _require(self.tsne_init in TSNE_INITS, "analysis.tsne_init", f"must be one of {TSNE_INITS}")
        _require(self.max_points >= 3, "analysis.max_points", "must be >= 3")


@dataclass(frozen=True)
class AblationConfig:
    kind: str = "LSTM"
    seeds: int = 3
    max_epochs: int = 20
    features: str = "all"

    def validate(self):
        _require(self.kind in [k.value for k in ModelKind], "ablation.kind", "must be LSTM, CNN or FCN")
        _require(self.seeds >= 1, "ablation.seeds", "must be >= 1")
        _require(self.max_epochs >= 1, "ablation.max_epochs", "must be >= 1")


@dataclass(frozen=True)
class RunSection:
    output_dir: str = "out"
    jobs: int = 1
    compare_seeds: int = 3

    def validate(self):
        _require(bool(self.output_dir), "run.output_dir", "must not be empty")
        _require(self.jobs >= 1, "run.jobs", "must be >= 1")
        _require(self.compare_seeds >= 1, "run.compare_seeds", "must be >= 1")


SECTIONS = {
    "dataset": DatasetConfig,
    "encoding": EncodingConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "snn": SnnConfig,
    "analysis": AnalysisConfig,
    "ablation": AblationConfig,
    "run": RunSection,
}


@dataclass(frozen=True)
class RunConfig:
    """Complete configuration of one pipeline run."""

    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    snn: SnnConfig = field(default_factory=SnnConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    run: RunSection = field(default_factory=RunSection)

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)

    def to_ini(self) -> str:
        """Serialize to the sectioned key=value format, sections and keys in fixed order."""
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            section = getattr(self, name)
            for f in dataclasses.fields(section):
                lines.append(f"{f.name} = {_format_value(getattr(section, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_ini())
        return path


def _require(condition: bool, key: str, message: str):
    if not condition:
        raise ConfigError(f"{key}: {message}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def _build_section(name: str, values: Dict[str, str]):
    cls = SECTIONS[name]
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
        kwargs[key] = _parse_value(f"{name}.{key}", raw, known[key].type)
    try:
        section = cls(**kwargs)
    except KinspikeError as e:
        raise ConfigError(f"{name}: {e}") from e
    if hasattr(section, "validate"):
        section.validate()
    return section


def split_override(item: str):
    """Split 'section.key=value' into (section, key, value)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    dotted, value = item.split("=", 1)
    if dotted.count(".") != 1:
        raise ConfigError(f"override key {dotted!r} must be section.key")
    section, key = dotted.strip().split(".")
    if section not in SECTIONS:
        raise ConfigError(f"{dotted}: unknown section {section!r}")
    return section, key, value


def parse_config(text: str, overrides: Iterable[str] = (), use_env: bool = True) -> RunConfig:
    """Parse configuration text, then apply dotted overrides and the environment."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed configuration: {e}") from e

    values: Dict[str, Dict[str, str]] = {name: {} for name in SECTIONS}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        values[name].update(parser.items(name))

    for item in overrides:
        section, key, value = split_override(item)
        values[section][key] = value

    if use_env:
        env_dir = os.environ.get(OUTPUT_DIR_ENV)
        if env_dir:
            values["run"]["output_dir"] = env_dir

    return RunConfig(**{name: _build_section(name, values[name]) for name in SECTIONS})


def load_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Load a run configuration.

    Args:
        path: configuration file (built-in defaults if None)
        overrides: 'section.key=value' strings applied after the file

    Returns:
        Validated RunConfig
    """
    load_dotenv(Path.cwd() / ".env", override=False)
    text = ""
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"configuration file not found: {path}")
        text = path.read_text()
        logger.info(f"Loading configuration from {path}")
    config = parse_config(text, overrides)
    logger.debug(f"Configuration:\n{config.to_ini()}")
    return config
