#!/usr/bin/env python3
"""
Spiking Conversion Tests
Neuron dynamics, rate matching, conversion fidelity, simulation and the SNN file.
"""

import numpy as np
import pytest

from kinspike.encoding.encoder import CorpusEncoder
from kinspike.errors import ConversionError, DependencyError, InputError, SchemaError
from kinspike.nets.models import build, predict_batches
from kinspike.nets.spec import ModelKind, ModelSpec
from kinspike.nets.trainer import argmax_lowest
from kinspike.numcore.rng import make_rng
from kinspike.spiking import (
    NeuronKind,
    NeuronState,
    SpikingNeuronModel,
    agreement,
    convert,
    evaluate_snn,
    load_snn,
    neuron_step,
    rate,
    rate_forward,
    save_snn,
    simulate,
)
from kinspike.spiking.converter import SpikingLayer, SpikingNetwork, calibration_sample, conv_to_dense
from kinspike.spiking.simulator import run_population

RECTIFIED = SpikingNeuronModel()
LIF = SpikingNeuronModel(NeuronKind.LIF)


def _windows(n=10, seed=0):
    return (make_rng(seed, "snn-windows").random((n, 40, 20)) < 0.3).astype(np.float64)


def _count_spikes(u, model, steps, dt=0.001):
    state = NeuronState.rest()
    total = 0
    for _ in range(steps):
        state, spike = neuron_step(state, u, model, dt)
        total += spike
    return total


class TestNeurons:
    @pytest.mark.parametrize("u", [0.0, -1.0, -50.0])
    def test_non_positive_input_never_spikes(self, u):
        assert _count_spikes(u, RECTIFIED, 2000) == 0

    def test_rectified_linear_rate(self):
        assert abs(_count_spikes(50.0, RECTIFIED, 1000) - 50) <= 1

    def test_lif_subthreshold_never_spikes(self):
        assert _count_spikes(0.95, LIF, 5000) == 0

    def test_lif_rate_close_to_steady_state(self):
        measured = _count_spikes(2.0, LIF, 2000) / 2.0
        assert measured == pytest.approx(float(rate(2.0, LIF)), rel=0.1)

    @pytest.mark.parametrize("u", [5.0, 50.0])
    def test_lif_fast_firing_matches_rate(self, u):
        measured = _count_spikes(u, LIF, 2000) / 2.0
        assert measured == pytest.approx(float(rate(u, LIF)), rel=0.1)

    def test_lif_refractory_ceiling(self):
        duration = 2.0
        measured = _count_spikes(1e9, LIF, 2000) / duration
        assert measured <= 1.0 / LIF.tau_ref + 1.0 / duration
        assert measured >= 0.9 / LIF.tau_ref

    def test_at_most_one_spike_per_step(self):
        _, spikes = neuron_step(NeuronState.rest(3), np.array([1e6, 1e6, 0.0]), RECTIFIED, 0.001)
        assert list(spikes) == [1, 1, 0]

    def test_dt_must_be_positive(self):
        with pytest.raises(SchemaError):
            neuron_step(NeuronState.rest(), 1.0, RECTIFIED, 0.0)

    def test_unknown_neuron_kind(self):
        with pytest.raises(SchemaError):
            SpikingNeuronModel("Izhikevich")


class TestRateMatching:
    @pytest.mark.parametrize("steps", [100, 200, 400, 1000])
    def test_quantization_bound(self, steps):
        dt = 0.001
        u = np.array([0.0, 0.5, 1.0, 5.0, 50.0])
        estimate = run_population(u, RECTIFIED, steps, dt) / (steps * dt)
        assert np.all(np.abs(estimate - rate(u, RECTIFIED)) <= 1.0 / (steps * dt))

    def test_error_shrinks_with_longer_runs(self):
        u = np.linspace(0.0, 120.0, 241)
        errors = [
            np.max(np.abs(run_population(u, RECTIFIED, steps, 0.001) / (steps * 0.001) - u))
            for steps in (250, 500, 1000)
        ]
        assert errors[0] >= errors[1] >= errors[2]


class TestConversion:
    def test_fcn_folding_preserves_outputs(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        x = np.stack([w.x for w in small_split.test[:10]]).astype(np.float64)
        snn = convert(spec, params)
        diff = np.abs(rate_forward(snn, x)["logits"] - predict_batches(spec, params, x).logits)
        assert np.max(diff) <= 1e-6

    @pytest.mark.parametrize("kind", [ModelKind.CNN, ModelKind.LSTM])
    def test_folding_preserves_outputs(self, kind):
        spec = ModelSpec(kind, 4)
        params = build(spec, 4)
        rng = make_rng(4, "bn-stats")
        for key in params:
            if key.endswith(".bn.mean"):
                params[key] = rng.normal(0.0, 0.1, params[key].shape)
            elif key.endswith(".bn.var"):
                params[key] = rng.uniform(0.5, 2.0, params[key].shape)
        x = _windows()
        snn = convert(spec, params)
        assert snn.hybrid == (kind is ModelKind.LSTM)
        diff = np.abs(rate_forward(snn, x)["logits"] - predict_batches(spec, params, x).logits)
        assert np.max(diff) <= 1e-6

    def test_no_batchnorm_weights_pass_through(self):
        spec = ModelSpec(ModelKind.FCN, 4, batchnorm=False)
        params = build(spec, 0)
        snn = convert(spec, params)
        assert np.array_equal(snn.layers[0].W, params["dense1.W"])
        assert np.array_equal(snn.layers[0].b, params["dense1.b"])
        assert np.array_equal(snn.readout_W, params["out.W"])

    def test_conv_as_dense(self):
        rng = make_rng(0, "conv")
        w, b = rng.standard_normal((3, 2, 4)), rng.standard_normal(4)
        x = rng.standard_normal((5, 2))
        dense, bias = conv_to_dense(w, b, 5)
        padded = np.pad(x, ((1, 1), (0, 0)))
        direct = np.stack([sum(padded[t + j] @ w[j] for j in range(3)) + b for t in range(5)])
        assert np.allclose(x.reshape(-1) @ dense + bias, direct.reshape(-1), atol=1e-12)

    def test_fully_spiking_lstm_is_refused(self):
        spec = ModelSpec(ModelKind.LSTM, 4)
        with pytest.raises(ConversionError):
            convert(spec, build(spec, 0), fully_spiking=True)

    def test_calibration_bounds_peak_rate(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        x = np.stack([w.x for w in small_split.train]).astype(np.float64)
        snn = convert(spec, params, calibration=x, percentile=100.0)
        for layer, act in zip(snn.layers, rate_forward(snn, x)["activations"]):
            assert np.max(act) / layer.neuron.amplitude <= 0.5 / snn.dt + 1e-9

    def test_calibration_sample(self):
        x = _windows(30)
        assert calibration_sample(x, limit=50).shape[0] == 30
        sample = calibration_sample(x, limit=10, seed=3)
        assert sample.shape == (10, 40, 20)
        assert np.array_equal(sample, calibration_sample(x, limit=10, seed=3))


class TestSimulation:
    def test_silent_input_gives_uniform_output(self):
        spec = ModelSpec(ModelKind.FCN, 4, batchnorm=False)
        params = {k: (np.zeros_like(v) if k.endswith(".b") else v) for k, v in build(spec, 0).items()}
        result = simulate(convert(spec, params), np.zeros((2, 40, 20)), steps=50)
        assert np.allclose(result.probs, 0.25, atol=1e-12)
        assert all(c.sum() == 0 for c in result.spike_counts.values())

    def test_spiking_predictions_follow_rate_mode(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        x_train = np.stack([w.x for w in small_split.train]).astype(np.float64)
        x_test = np.stack([w.x for w in small_split.test]).astype(np.float64)
        snn = convert(spec, params, calibration=calibration_sample(x_train), steps=500)
        spiking = argmax_lowest(simulate(snn, x_test).probs)
        rate_mode = argmax_lowest(rate_forward(snn, x_test)["probs"])
        assert agreement(spiking, rate_mode) >= 0.9

    def test_evaluation_is_deterministic(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        snn = convert(spec, params, steps=40)
        a = evaluate_snn(snn, small_split.test[:20])
        b = evaluate_snn(snn, small_split.test[:20])
        assert a.accuracy == b.accuracy
        assert np.array_equal(a.predictions, b.predictions)
        assert a.synaptic_events == b.synaptic_events > 0

    def test_synaptic_events_hand_weighted(self):
        spec = ModelSpec(ModelKind.FCN, 2, input_shape=(2, 2), batchnorm=False)
        W = np.zeros((4, 3))
        W[0] = W[2] = [25.0, 0.0, 50.0]
        layer = SpikingLayer("dense1", W, np.zeros(3), RECTIFIED)
        snn = SpikingNetwork(spec, [layer], np.zeros((3, 2)), np.zeros(2), dt=0.001, steps=100)
        x = np.array([[[1.0, 0.0], [1.0, 0.0]]])
        result = simulate(snn, x)
        assert list(result.spike_counts["dense1"][0]) == [5, 0, 10]
        # 2 active lines x 100 steps x 3 targets, then 15 spikes x 2 readout targets.
        assert list(result.synaptic_events) == [2 * 100 * 3 + 15 * 2]

    def test_synaptic_events_are_spikes_times_fan_out(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        snn = convert(spec, params, steps=30)
        x = np.stack([w.x for w in small_split.test[:5]]).astype(np.float64)
        result = simulate(snn, x)
        sizes = [layer.size for layer in snn.layers]
        fan_outs = sizes[1:] + [snn.readout_W.shape[1]]
        expected = np.count_nonzero(x.reshape(len(x), -1), axis=1) * 30 * sizes[0]
        for layer, fan_out in zip(snn.layers, fan_outs):
            expected = expected + result.spike_counts[layer.name].sum(axis=1) * fan_out
        assert np.array_equal(result.synaptic_events, expected)

    def test_event_inputs_cost_fewer_synaptic_events(self, trained_fcn, small_split, small_logs):
        spec, params, _ = trained_fcn
        snn = convert(spec, params, steps=40)
        raw = CorpusEncoder(mode="raw", holdout_per_cell=1, split_seed=7).encode(small_logs).split
        event_events = simulate(snn, small_split.test).synaptic_events.mean()
        raw_events = simulate(snn, raw.test).synaptic_events.mean()
        assert event_events < raw_events

    def test_trace_rows(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        snn = convert(spec, params, steps=10)
        result = simulate(snn, small_split.test[:3], record_trace=True)
        assert list(result.trace.columns) == ["step", "layer", "spike_count"]
        assert len(result.trace) == 10 * len(snn.layers)

    def test_invalid_settings(self, trained_fcn):
        spec, params, _ = trained_fcn
        snn = convert(spec, params)
        with pytest.raises(InputError):
            simulate(snn, _windows(1), steps=0)
        with pytest.raises(InputError):
            evaluate_snn(snn, [])


class TestSnnFile:
    @pytest.mark.parametrize("kind", [ModelKind.FCN, ModelKind.LSTM])
    def test_round_trip(self, tmp_path, kind):
        spec = ModelSpec(kind, 4)
        snn = convert(spec, build(spec, 2), neuron=LIF, steps=30, dt=0.002, calibration=_windows(8))
        path = save_snn(snn, tmp_path / "net.snn.json", metrics={"source": "m.json"})
        loaded, envelope = load_snn(path)
        assert loaded.hybrid == snn.hybrid
        assert loaded.amplitudes == snn.amplitudes
        assert (loaded.steps, loaded.dt) == (30, 0.002)
        assert loaded.layers[0].neuron.kind is NeuronKind.LIF
        assert envelope["metrics"]["source"] == "m.json"
        x = _windows(3, seed=1)
        assert np.array_equal(simulate(loaded, x).probs, simulate(snn, x).probs)

    def test_missing_file_names_convert(self, tmp_path):
        with pytest.raises(DependencyError) as info:
            load_snn(tmp_path / "absent.snn.json")
        assert info.value.command == "convert"
