"""
Spiking neuron models.

SpikingRectifiedLinear integrates max(0, u) and fires when the voltage
reaches 1, subtracting 1; its firing rate is the ReLU of its input current.
LIF integrates dv/dt = (u - v) / tau_rc by exponential Euler, resets to 0 on
a spike and holds for tau_ref measured from the interpolated spike time, so
the simulated rate tracks rate() up to 1/tau_ref. Both emit at most one spike
per step.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from kinspike.errors import SchemaError


class NeuronKind(str, Enum):
    SPIKING_RECTIFIED_LINEAR = "SpikingRectifiedLinear"
    LIF = "LIF"


@dataclass(frozen=True)
class SpikingNeuronModel:
    kind: NeuronKind = NeuronKind.SPIKING_RECTIFIED_LINEAR
    amplitude: float = 1.0
    tau_rc: float = 0.02
    tau_ref: float = 0.002

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", NeuronKind(self.kind))
        except ValueError:
            raise SchemaError(f"unknown neuron kind: {self.kind!r}") from None
        if not self.amplitude > 0:
            raise SchemaError("neuron amplitude must be positive")
        if self.kind is NeuronKind.LIF and not (self.tau_rc > 0 and self.tau_ref > 0):
            raise SchemaError("LIF tau_rc and tau_ref must be positive")

    def with_amplitude(self, amplitude: float) -> "SpikingNeuronModel":
        return SpikingNeuronModel(self.kind, float(amplitude), self.tau_rc, self.tau_ref)

    def to_dict(self):
        return {"kind": self.kind.value, "amplitude": self.amplitude, "tau_rc": self.tau_rc, "tau_ref": self.tau_ref}


@dataclass(frozen=True, eq=False)
class NeuronState:
    """Membrane voltage and remaining refractory time (scalars or arrays)."""

    voltage: np.ndarray
    refractory: np.ndarray

    @classmethod
    def rest(cls, shape=()) -> "NeuronState":
        return cls(np.zeros(shape), np.zeros(shape))


def rate(u, model: SpikingNeuronModel) -> np.ndarray:
    """Steady-state firing rate (Hz) for constant input current ``u``."""
    u = np.asarray(u, dtype=np.float64)
    if model.kind is NeuronKind.SPIKING_RECTIFIED_LINEAR:
        return np.maximum(u, 0.0)
    out = np.zeros_like(u)
    above = u > 1.0
    out[above] = 1.0 / (model.tau_ref + model.tau_rc * np.log1p(1.0 / (u[above] - 1.0)))
    return out


def step(voltage: np.ndarray, refractory: np.ndarray, u: np.ndarray, model: SpikingNeuronModel,
         dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance a population one step; returns (voltage, refractory, spikes in {0, 1})."""
    if model.kind is NeuronKind.SPIKING_RECTIFIED_LINEAR:
        voltage = voltage + np.maximum(u, 0.0) * dt
        spikes = voltage >= 1.0
        voltage = np.where(spikes, voltage - 1.0, voltage)
        return voltage, refractory, spikes.astype(np.uint8)

    # Integrate only over the part of the step left after the refractory period.
    refractory = refractory - dt
    delta_t = np.clip(dt - refractory, 0.0, dt)
    refractory = np.maximum(refractory, 0.0)
    voltage = voltage - (u - voltage) * np.expm1(-delta_t / model.tau_rc)
    voltage = np.maximum(voltage, 0.0)
    spikes = voltage >= 1.0

    # Threshold crossing time, measured from the start of the step.
    excess = np.where(spikes, voltage - 1.0, 0.0)
    drive = np.where(spikes & (u > 1.0), u - 1.0, 1.0)
    overshoot = np.clip(excess / drive, 0.0, 1.0 - 1e-12)
    spike_time = np.clip(dt + model.tau_rc * np.log1p(-overshoot), 0.0, dt)

    voltage = np.where(spikes, 0.0, voltage)
    refractory = np.where(spikes, model.tau_ref + spike_time, refractory)
    return voltage, refractory, spikes.astype(np.uint8)


def neuron_step(state: NeuronState, input_current, model: SpikingNeuronModel, dt: float):
    """
    One integration step of a neuron (or population).

    Returns:
        (new NeuronState, spike) with spike 0 or 1 per neuron
    """
    if not dt > 0:
        raise SchemaError(f"dt must be positive, got {dt}")
    voltage, refractory, spikes = step(
        np.asarray(state.voltage, dtype=np.float64),
        np.asarray(state.refractory, dtype=np.float64),
        np.asarray(input_current, dtype=np.float64),
        model,
        dt,
    )
    if np.ndim(spikes) == 0:
        return NeuronState(float(voltage), float(refractory)), int(spikes)
    return NeuronState(voltage, refractory), spikes
