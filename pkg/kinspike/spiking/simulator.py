#!/usr/bin/env python3
"""
Spiking Simulation
Presents each window as a constant current for T steps and runs the spiking
layers one after another: a layer's spike counts, averaged over the run, become
the constant current of the next layer. The output layer is read as the
time-averaged linear response of the last spiking layer, then softmaxed.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from kinspike.encoding.windows import EventWindow, stack_windows
from kinspike.errors import InputError
from kinspike.nets.models import softmax
from kinspike.nets.trainer import EvalResult, argmax_lowest, class_names, summarize_predictions
from kinspike.spiking.converter import SpikingNetwork, present_input
from kinspike.spiking.neurons import step

logger = logging.getLogger(__name__)

# Membrane voltage at the start of a presentation; 0.5 rounds spike counts to nearest.
INITIAL_VOLTAGE = 0.5


@dataclass(frozen=True, eq=False)
class SimulationResult:
    probs: np.ndarray
    logits: np.ndarray
    spike_counts: Dict[str, np.ndarray]
    synaptic_events: np.ndarray
    trace: Optional[pd.DataFrame] = None


@dataclass(frozen=True, eq=False)
class SnnEvalResult(EvalResult):
    synaptic_events: float = 0.0
    spikes_per_window: float = 0.0
    spike_rates: Dict[str, float] = field(default_factory=dict)


def run_population(u: np.ndarray, neuron, steps: int, dt: float, trace: Optional[List] = None,
                   layer: str = "") -> np.ndarray:
    """Drive a population with constant current ``u`` for ``steps`` steps; returns spike counts."""
    voltage = np.full(u.shape, INITIAL_VOLTAGE)
    refractory = np.zeros(u.shape)
    counts = np.zeros(u.shape)
    for t in range(steps):
        voltage, refractory, spikes = step(voltage, refractory, u, neuron, dt)
        counts += spikes
        if trace is not None:
            trace.append((t, layer, int(spikes.sum())))
    return counts


def _simulate_batch(snn: SpikingNetwork, x: np.ndarray, steps: int, dt: float, trace: Optional[List]):
    h = present_input(snn.spec, snn.front, x, snn.input_gain)
    fan_outs = [layer.size for layer in snn.layers[1:]] + [snn.readout_W.shape[1]]
    first_fan_out = snn.layers[0].size if snn.layers else snn.readout_W.shape[1]
    events = np.count_nonzero(h, axis=1).astype(np.float64) * steps * first_fan_out

    counts_by_layer = {}
    for layer, fan_out in zip(snn.layers, fan_outs):
        amplitude = layer.neuron.amplitude
        u = (h @ layer.W + layer.b) / amplitude
        counts = run_population(u, layer.neuron, steps, dt, trace, layer.name)
        counts_by_layer[layer.name] = counts
        events += counts.sum(axis=1) * fan_out
        h = amplitude * counts / (steps * dt)

    logits = h @ snn.readout_W + snn.readout_b
    return logits, counts_by_layer, events


def simulate(snn: SpikingNetwork, windows, steps: Optional[int] = None, dt: Optional[float] = None,
             record_trace: bool = False, batch_size: int = 256) -> SimulationResult:
    """
    Simulate a batch of windows.

    Args:
        snn: converted network
        windows: EventWindows or an (N, L, F) array
        steps, dt: override the network's stored simulation settings
        record_trace: collect (step, layer, spike_count) rows summed over the batch
    """
    steps = snn.steps if steps is None else int(steps)
    dt = snn.dt if dt is None else float(dt)
    if steps < 1:
        raise InputError(f"simulation needs T >= 1, got {steps}")
    if dt <= 0:
        raise InputError(f"dt must be positive, got {dt}")

    if isinstance(windows, np.ndarray):
        x = windows
    else:
        x = np.stack([w.x for w in windows]).astype(np.float64)

    trace: Optional[List] = [] if record_trace else None
    logits, events = [], []
    counts: Dict[str, List[np.ndarray]] = {layer.name: [] for layer in snn.layers}
    for start in range(0, x.shape[0], batch_size):
        batch_logits, batch_counts, batch_events = _simulate_batch(snn, x[start:start + batch_size], steps, dt, trace)
        logits.append(batch_logits)
        events.append(batch_events)
        for name, c in batch_counts.items():
            counts[name].append(c)

    logits = np.concatenate(logits)
    trace_frame = None
    if trace is not None:
        trace_frame = (
            pd.DataFrame(trace, columns=["step", "layer", "spike_count"])
            .groupby(["step", "layer"], sort=False, as_index=False)["spike_count"].sum()
        )
    return SimulationResult(
        probs=softmax(logits),
        logits=logits,
        spike_counts={name: np.concatenate(c) for name, c in counts.items()},
        synaptic_events=np.concatenate(events),
        trace=trace_frame,
    )


def evaluate_snn(snn: SpikingNetwork, windows: Sequence[EventWindow], steps: Optional[int] = None,
                 dt: Optional[float] = None, target: str = "task") -> SnnEvalResult:
    """Accuracy of the spiking network, with the same metric as the base evaluation."""
    if not windows:
        raise InputError("cannot evaluate on an empty window set")
    classes = class_names(target)
    x, y = stack_windows(windows, target, classes)
    sim = simulate(snn, x, steps, dt)
    preds = argmax_lowest(sim.probs)
    base = summarize_predictions(preds, y, sim.probs, windows, classes)

    steps_used = snn.steps if steps is None else steps
    dt_used = snn.dt if dt is None else dt
    rates = {
        name: float(c.mean() / (steps_used * dt_used)) for name, c in sim.spike_counts.items()
    }
    total_spikes = sum(float(c.sum(axis=1).mean()) for c in sim.spike_counts.values())
    logger.info(
        f"stage=snn accuracy={base.accuracy:.4f} steps={steps_used} dt={dt_used} "
        f"synaptic_events={float(sim.synaptic_events.mean()):.1f}"
    )
    return SnnEvalResult(
        accuracy=base.accuracy,
        predictions=base.predictions,
        labels=base.labels,
        probs=base.probs,
        exercise_accuracy=base.exercise_accuracy,
        classes=base.classes,
        synaptic_events=float(sim.synaptic_events.mean()),
        spikes_per_window=total_spikes,
        spike_rates=rates,
    )


def agreement(a: np.ndarray, b: np.ndarray) -> float:
    """Fraction of windows on which two prediction vectors agree."""
    return float(np.mean(np.asarray(a) == np.asarray(b)))
