#!/usr/bin/env python3
"""
Accuracy Comparison Grid
Base and converted-SNN test accuracy for every (model kind, encoding mode)
pair, for one prediction target, averaged over training seeds.
"""

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np
import pandas as pd

from kinspike.encoding.encoder import CorpusEncoder
from kinspike.encoding.windows import stack_windows
from kinspike.errors import InputError
from kinspike.ingestion.synthetic import KinematicLog
from kinspike.nets.spec import ModelKind, ModelSpec, TrainConfig
from kinspike.nets.trainer import class_names, evaluate, train
from kinspike.spiking.converter import calibration_sample, convert
from kinspike.spiking.neurons import SpikingNeuronModel
from kinspike.spiking.simulator import agreement, evaluate_snn

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = [
    "kind", "mode", "target", "base_accuracy", "snn_accuracy", "accuracy_gap", "agreement",
    "synaptic_events", "seeds",
]


@dataclass(frozen=True)
class SnnSettings:
    neuron: SpikingNeuronModel = SpikingNeuronModel()
    steps: int = 200
    dt: float = 0.001
    input_gain: float = 1.0
    percentile: float = 99.9


@dataclass(frozen=True)
class ComparisonCell:
    kind: str
    mode: str
    target: str
    base_accuracy: float
    snn_accuracy: float
    agreement: float
    synaptic_events: float
    seeds: tuple

    @property
    def accuracy_gap(self) -> float:
        return self.base_accuracy - self.snn_accuracy

    def to_dict(self) -> Dict:
        row = dataclasses.asdict(self)
        row["accuracy_gap"] = self.accuracy_gap
        row["seeds"] = " ".join(str(s) for s in self.seeds)
        return {c: row[c] for c in COMPARISON_COLUMNS}


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    cells: List[ComparisonCell]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.to_dict() for c in self.cells], columns=COMPARISON_COLUMNS)

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    def to_records(self) -> List[Dict]:
        return [c.to_dict() for c in self.cells]

    def cell(self, kind: str, mode: str) -> ComparisonCell:
        for c in self.cells:
            if c.kind == kind and c.mode == mode:
                return c
        raise InputError(f"no comparison cell for kind={kind} mode={mode}")


def compare_cell(spec: ModelSpec, split, train_config: TrainConfig, snn: SnnSettings,
                 target: str, seeds: Sequence[int], mode: str) -> ComparisonCell:
    """Train per seed, convert, and average base/SNN accuracy on the test windows."""
    classes = class_names(target)
    x_train, _ = stack_windows(split.train, target, classes)
    base, spiking, agree, events = [], [], [], []
    for seed in seeds:
        params, _ = train(spec, split, dataclasses.replace(train_config, seed=int(seed)), target)
        base_result = evaluate(spec, params, split.test, target)
        network = convert(
            spec, params, snn.neuron, dt=snn.dt, steps=snn.steps, input_gain=snn.input_gain,
            calibration=calibration_sample(x_train, seed=int(seed)), percentile=snn.percentile,
        )
        snn_result = evaluate_snn(network, split.test, target=target)
        base.append(base_result.accuracy)
        spiking.append(snn_result.accuracy)
        agree.append(agreement(base_result.predictions, snn_result.predictions))
        events.append(snn_result.synaptic_events)
    cell = ComparisonCell(
        kind=spec.kind.value,
        mode=mode,
        target=target,
        base_accuracy=float(np.mean(base)),
        snn_accuracy=float(np.mean(spiking)),
        agreement=float(np.mean(agree)),
        synaptic_events=float(np.mean(events)),
        seeds=tuple(int(s) for s in seeds),
    )
    logger.info(
        f"stage=compare kind={cell.kind} mode={mode} base={cell.base_accuracy:.4f} "
        f"snn={cell.snn_accuracy:.4f} agreement={cell.agreement:.4f}"
    )
    return cell


def comparison_grid(
    logs: Sequence[KinematicLog],
    encoders: Mapping[str, CorpusEncoder],
    specs: Mapping[str, ModelSpec],
    train_config: TrainConfig,
    snn: SnnSettings = SnnSettings(),
    target: str = "task",
    seeds: Sequence[int] = (42,),
) -> ComparisonTable:
    """
    Base/SNN x encoding mode x model kind.

    Args:
        logs: corpus
        encoders: encoder per mode ("raw", "event")
        specs: architecture per model kind
        train_config: shared training settings (seed replaced per run)
        snn: conversion and simulation settings
    """
    logger.info(f"=== Starting Comparison Grid: target={target} modes={list(encoders)} kinds={list(specs)} ===")
    cells = []
    for mode, encoder in encoders.items():
        split = encoder.encode(logs).split
        for kind in (k.value for k in ModelKind):
            if kind in specs:
                cells.append(compare_cell(specs[kind], split, train_config, snn, target, seeds, mode))
    logger.info("=== Comparison Grid Complete ===")
    return ComparisonTable(cells)
