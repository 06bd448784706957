#!/usr/bin/env python3
"""
Pipeline Stages
One function per CLI command. Every stage reads its inputs from and writes its
artifacts under the configured output directory; a missing upstream artifact
raises DependencyError naming the command that produces it.

Artifact layout:
    logs/*.csv, manifest.json, validation.json          gen
    events/*.csv, thresholds.json, split.json,
    standardization.json                                encode
    models/<kind>-<target>-<mode>.json (+ .history.csv) train
    models/<kind>-<target>-<mode>.snn.json              convert
    reports/<model>/report.json, confusion.csv/.svg     eval
    reports/<model>/embedding.csv/.svg, spread.csv      embed
    ablation/ablation.csv/.json/.svg                    ablate
    comparison/comparison.csv/.json/.svg                compare
"""

import dataclasses
import functools
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from kinspike.analysis.ablation import ablation_seeds, ablation_sweep, parse_features
from kinspike.analysis.comparison import SnnSettings, comparison_grid
from kinspike.analysis.confusion import confusion
from kinspike.analysis.embedding import embed, separation_ratio, spread_stats
from kinspike.config import RunConfig
from kinspike.data_quality_checks import LogQualityValidator
from kinspike.encoding.encoder import CorpusEncoder
from kinspike.encoding.storage import write_json
from kinspike.encoding.windows import DatasetSplit, stack_windows
from kinspike.errors import KinspikeError
from kinspike.ingestion.storage import load_corpus
from kinspike.ingestion.synthetic import KinematicLogGenerator
from kinspike.nets.models import count_params
from kinspike.nets.serialization import load, save
from kinspike.nets.spec import ModelKind, ModelSpec
from kinspike.nets.trainer import class_names, evaluate, train
from kinspike.spiking.converter import calibration_sample, convert
from kinspike.spiking.neurons import SpikingNeuronModel
from kinspike.spiking.serialization import load_snn, save_snn
from kinspike.spiking.simulator import evaluate_snn, simulate
from kinspike.viz.plots import (
    create_ablation_chart,
    create_comparison_chart,
    create_confusion_heatmap,
    create_embedding_scatter,
)

logger = logging.getLogger(__name__)

MODELS_DIR = "models"
REPORTS_DIR = "reports"
ABLATION_DIR = "ablation"
COMPARISON_DIR = "comparison"
TRACE_WINDOWS = 32


def stage(name: str):
    """Log the boundaries of a stage, and log then re-raise its failures."""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            logger.info(f"=== Starting stage: {name} ===")
            try:
                result = fn(*args, **kwargs)
            except KinspikeError as e:
                logger.error(f"stage={name} failed: {e}")
                raise
            logger.info(f"=== Stage complete: {name} ===")
            return result

        return wrapper

    return decorate


def model_stem(kind: str, target: str, mode: str) -> str:
    return f"{kind}-{target}-{mode}"


def model_path(cfg: RunConfig, kind: Optional[str] = None, target: Optional[str] = None,
               mode: Optional[str] = None) -> Path:
    stem = model_stem(kind or cfg.model.kind, target or cfg.model.target, mode or cfg.encoding.mode)
    return cfg.output_dir / MODELS_DIR / f"{stem}.json"


def snn_path_for(model_file: Path) -> Path:
    return model_file.with_name(model_file.name[:-len(".json")] + ".snn.json")


def history_path_for(model_file: Path) -> Path:
    return model_file.with_name(model_file.name[:-len(".json")] + ".history.csv")


def report_dir_for(cfg: RunConfig, artifact: Path) -> Path:
    return cfg.output_dir / REPORTS_DIR / artifact.name[:-len(".json")]


def model_spec(cfg: RunConfig, kind: Optional[str] = None, target: Optional[str] = None,
               n_features: int = 20) -> ModelSpec:
    return ModelSpec(
        kind=kind or cfg.model.kind,
        num_classes=len(class_names(target or cfg.model.target)),
        input_shape=(cfg.encoding.window_length, n_features),
        dropout_rate=cfg.model.dropout_rate,
        batchnorm=cfg.model.batchnorm,
    )


def neuron_model(cfg: RunConfig) -> SpikingNeuronModel:
    return SpikingNeuronModel(cfg.snn.neuron, cfg.snn.amplitude, cfg.snn.tau_rc, cfg.snn.tau_ref)


def snn_settings(cfg: RunConfig) -> SnnSettings:
    return SnnSettings(neuron_model(cfg), cfg.snn.steps, cfg.snn.dt, cfg.snn.input_gain,
                       cfg.snn.calibration_percentile)


def _run_info(envelope: Dict, cfg: RunConfig) -> Tuple[str, str]:
    run = envelope.get("run", {})
    return run.get("target", cfg.model.target), run.get("mode", cfg.encoding.mode)


def load_encoded_split(cfg: RunConfig, mode: Optional[str] = None) -> DatasetSplit:
    logs = load_corpus(cfg.output_dir)
    return CorpusEncoder.from_config(cfg.encoding, mode).load_split(logs, cfg.output_dir)


@stage("gen")
def cmd_gen(cfg: RunConfig) -> Dict:
    """Generate the synthetic corpus: log CSVs, manifest.json and validation.json."""
    generator = KinematicLogGenerator(
        reps_per_cell=cfg.dataset.reps_per_cell,
        base_seed=cfg.dataset.seed,
        duration_range=(cfg.dataset.duration_min, cfg.dataset.duration_max),
        camera_motion=cfg.dataset.camera_motion,
        jobs=cfg.run.jobs,
    )
    result = generator.run_generation_pipeline(cfg.output_dir)
    validation = LogQualityValidator().save_validation_results(
        result["validation"], cfg.output_dir / "validation.json"
    )
    return {
        "command": "gen",
        "log_count": result["log_count"],
        "manifest": result["manifest"],
        "validation": str(validation),
    }


@stage("encode")
def cmd_encode(cfg: RunConfig) -> Dict:
    """Encode the stored corpus: event CSVs, thresholds.json, split.json, standardization.json."""
    logs = load_corpus(cfg.output_dir)
    summary = CorpusEncoder.from_config(cfg.encoding).run_encoding_pipeline(logs, cfg.output_dir)
    return {"command": "encode", **summary}


def train_model(cfg: RunConfig, split: DatasetSplit, kind: Optional[str] = None,
                target: Optional[str] = None, mode: Optional[str] = None) -> Tuple[ModelSpec, Path, Dict]:
    kind = kind or cfg.model.kind
    target = target or cfg.model.target
    mode = mode or cfg.encoding.mode
    spec = model_spec(cfg, kind, target)
    params, history = train(spec, split, cfg.train, target)

    path = model_path(cfg, kind, target, mode)
    metrics = {
        "best_test_accuracy": history.best_test_accuracy,
        "best_epoch": history.best_epoch,
        "epochs": len(history),
        "parameters": count_params(spec),
    }
    save(spec, params, path, training_config=cfg.train.to_dict(), metrics=metrics,
         extra={"run": {"target": target, "mode": mode}})
    history_file = history_path_for(path)
    history.to_frame().to_csv(history_file, index=False, lineterminator="\n")
    return spec, path, metrics


@stage("train")
def cmd_train(cfg: RunConfig, kind: Optional[str] = None, target: Optional[str] = None,
              mode: Optional[str] = None) -> Dict:
    """Train one model on the stored split; writes the model file and its history CSV."""
    mode = mode or cfg.encoding.mode
    split = load_encoded_split(cfg, mode)
    spec, path, metrics = train_model(cfg, split, kind, target, mode)
    return {
        "command": "train",
        "model": str(path),
        "history": str(history_path_for(path)),
        "kind": spec.kind.value,
        **metrics,
    }


@stage("convert")
def cmd_convert(cfg: RunConfig, model: Optional[str] = None, fully_spiking: bool = False) -> Dict:
    """Convert a trained model to a spiking network, calibrated on training windows."""
    source = Path(model) if model else model_path(cfg)
    spec, params, envelope = load(source)
    target, mode = _run_info(envelope, cfg)
    split = load_encoded_split(cfg, mode)
    x_train, _ = stack_windows(split.train, target, class_names(target))

    snn = convert(
        spec,
        params,
        neuron_model(cfg),
        dt=cfg.snn.dt,
        steps=cfg.snn.steps,
        input_gain=cfg.snn.input_gain,
        calibration=calibration_sample(x_train, seed=cfg.train.seed),
        percentile=cfg.snn.calibration_percentile,
        fully_spiking=fully_spiking,
    )
    path = save_snn(snn, snn_path_for(source), metrics={"source": source.name},
                    extra={"run": {"target": target, "mode": mode}})
    return {
        "command": "convert",
        "snn": str(path),
        "hybrid": snn.hybrid,
        "layers": [layer.name for layer in snn.layers],
        "amplitudes": snn.amplitudes,
    }


@stage("eval")
def cmd_eval(cfg: RunConfig, model: Optional[str] = None, snn: Optional[str] = None,
             spiking: bool = False) -> Dict:
    """
    Evaluate a base model or a converted SNN on the test windows.

    Writes reports/<model>/report.json plus the confusion matrix as CSV and SVG.
    """
    if snn or spiking:
        artifact = Path(snn) if snn else snn_path_for(Path(model) if model else model_path(cfg))
        network, envelope = load_snn(artifact)
        spec = network.spec
    else:
        artifact = Path(model) if model else model_path(cfg)
        spec, params, envelope = load(artifact)
    target, mode = _run_info(envelope, cfg)
    split = load_encoded_split(cfg, mode)

    report = {
        "model": artifact.name,
        "kind": spec.kind.value,
        "target": target,
        "mode": mode,
        "spiking": bool(snn or spiking),
        "windows": len(split.test),
    }
    out_dir = report_dir_for(cfg, artifact)
    if report["spiking"]:
        result = evaluate_snn(network, split.test, target=target)
        report.update({
            "steps": network.steps,
            "dt": network.dt,
            "neuron": network.layers[0].neuron.kind.value if network.layers else None,
            "hybrid": network.hybrid,
            "synaptic_events_per_window": result.synaptic_events,
            "spikes_per_window": result.spikes_per_window,
            "spike_rates": result.spike_rates,
        })
        if cfg.snn.trace:
            x_test, _ = stack_windows(split.test[:TRACE_WINDOWS], target, class_names(target))
            trace = simulate(network, x_test, record_trace=True).trace
            out_dir.mkdir(parents=True, exist_ok=True)
            trace.to_csv(out_dir / "trace.csv", index=False, lineterminator="\n")
            report["trace"] = "trace.csv"
    else:
        result = evaluate(spec, params, split.test, target)
        report["best_test_accuracy"] = envelope.get("metrics", {}).get("best_test_accuracy")

    matrix = confusion(result.predictions, result.labels, result.classes)
    truth, predicted, count = matrix.most_confused()
    report.update({
        "accuracy": result.accuracy,
        "exercise_accuracy": result.exercise_accuracy,
        "classes": list(result.classes),
        "per_class_recall": matrix.per_class_recall(),
        "most_confused": {"truth": truth, "predicted": predicted, "count": count},
        "confusion": "confusion.csv",
    })
    matrix.to_csv(out_dir / "confusion.csv")
    create_confusion_heatmap(matrix, out_dir / "confusion.svg", title=f"{artifact.name[:-5]} confusion")
    path = write_json(report, out_dir / "report.json")
    logger.info(f"stage=eval model={artifact.name} accuracy={result.accuracy:.4f}")
    return {"command": "eval", "report": str(path), "accuracy": result.accuracy,
            "exercise_accuracy": result.exercise_accuracy}


@stage("ablate")
def cmd_ablate(cfg: RunConfig) -> Dict:
    """Leave-one-feature-out sweep; writes ablation.csv/.json/.svg."""
    logs = load_corpus(cfg.output_dir)
    target = cfg.model.target
    spec = model_spec(cfg, cfg.ablation.kind, target)
    train_config = dataclasses.replace(cfg.train, max_epochs=cfg.ablation.max_epochs)
    seeds = ablation_seeds(cfg.train.seed, cfg.ablation.seeds)
    report = ablation_sweep(
        logs,
        spec,
        train_config,
        CorpusEncoder.from_config(cfg.encoding),
        seeds=seeds,
        target=target,
        features=parse_features(cfg.ablation.features),
        jobs=cfg.run.jobs,
    )
    out_dir = cfg.output_dir / ABLATION_DIR
    frame = report.to_frame()
    csv_path = report.to_csv(out_dir / "ablation.csv")
    write_json({
        "kind": spec.kind.value,
        "target": target,
        "mode": cfg.encoding.mode,
        "seeds": list(seeds),
        "max_epochs": cfg.ablation.max_epochs,
        "baseline_accuracy": float(frame["baseline_accuracy"].iloc[0]) if len(frame) else None,
        "rows": frame.to_dict(orient="records"),
    }, out_dir / "ablation.json")
    create_ablation_chart(frame, out_dir / "ablation.svg",
                          title=f"Feature importance ({spec.kind.value}, {target})")
    return {"command": "ablate", "ablation": str(csv_path), "rows": len(report)}


@stage("embed")
def cmd_embed(cfg: RunConfig, model: Optional[str] = None) -> Dict:
    """t-SNE of the penultimate activations; writes embedding.csv/.svg and spread.csv."""
    artifact = Path(model) if model else model_path(cfg)
    spec, params, envelope = load(artifact)
    target, mode = _run_info(envelope, cfg)
    split = load_encoded_split(cfg, mode)

    windows = list(split.test)
    sources = ["test"] * len(windows)
    if cfg.analysis.embed_include_train:
        windows = list(split.train) + windows
        sources = ["train"] * len(split.train) + sources

    plot = embed(
        spec, params, windows, target,
        perplexity=cfg.analysis.perplexity,
        iters=cfg.analysis.tsne_iters,
        seed=cfg.analysis.tsne_seed,
        init=cfg.analysis.tsne_init,
        max_points=cfg.analysis.max_points,
        sources=sources,
    )
    out_dir = report_dir_for(cfg, artifact)
    csv_path = plot.to_csv(out_dir / "embedding.csv")
    spread = spread_stats(plot)
    spread.to_csv(out_dir / "spread.csv", index=False, lineterminator="\n")
    create_embedding_scatter(plot, out_dir / "embedding.svg",
                             title=f"{spec.kind.value} embedding by {target}")
    ratio = separation_ratio(plot)
    write_json({
        "model": artifact.name,
        "points": len(plot),
        "embedding_dim": int(plot.vectors.shape[1]),
        "tsne": plot.config,
        "kl_initial": plot.kl_initial,
        "kl_final": plot.kl_final,
        "entropy_error": plot.entropy_error,
        "separation_ratio": ratio,
        "spread": spread.to_dict(orient="records"),
    }, out_dir / "embedding.json")
    return {"command": "embed", "embedding": str(csv_path), "points": len(plot),
            "separation_ratio": ratio, "kl_final": plot.kl_final}


@stage("compare")
def cmd_compare(cfg: RunConfig) -> Dict:
    """Base/SNN x raw/event x LSTM/CNN/FCN for the configured target."""
    logs = load_corpus(cfg.output_dir)
    target = cfg.model.target
    encoders = {mode: CorpusEncoder.from_config(cfg.encoding, mode) for mode in ("raw", "event")}
    specs = {kind.value: model_spec(cfg, kind.value, target) for kind in ModelKind}
    table = comparison_grid(
        logs, encoders, specs, cfg.train, snn_settings(cfg), target,
        seeds=ablation_seeds(cfg.train.seed, cfg.run.compare_seeds),
    )
    out_dir = cfg.output_dir / COMPARISON_DIR
    frame = table.to_frame()
    csv_path = table.to_csv(out_dir / "comparison.csv")
    write_json({"target": target, "rows": table.to_records()}, out_dir / "comparison.json")
    create_comparison_chart(frame, out_dir / "comparison.svg", title=f"Base vs SNN accuracy ({target})")
    mean_gap = float(np.mean(np.abs(frame["accuracy_gap"]))) if len(frame) else 0.0
    return {"command": "compare", "comparison": str(csv_path), "cells": len(table.cells),
            "mean_abs_gap": mean_gap}
