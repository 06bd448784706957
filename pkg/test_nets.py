#!/usr/bin/env python3
"""
Classifier Tests
Shapes and initialization, forward/backward correctness, training, evaluation
and the model file format.
"""

import json
import math

import numpy as np
import pytest

from kinspike.encoding.windows import DatasetSplit, EventWindow, stack_windows
from kinspike.errors import DependencyError, FormatError, InputError, SchemaError, TrainingError
from kinspike.ingestion.schema import OperatorId, TaskId
from kinspike.nets.layers import BiLSTM, lstm_forward
from kinspike.nets.models import build, count_params, forward, loss_and_grads, predict_batches
from kinspike.nets.serialization import load, save
from kinspike.nets.spec import EMBEDDING_UNITS, ModelKind, ModelSpec, TrainConfig
from kinspike.nets.trainer import class_names, evaluate, majority_vote, summarize_predictions, train
from kinspike.numcore.rng import make_rng
from kinspike.orchestration.acceptance import COMPACT_FCN_SIZES, COMPACT_SHAPE, network_grad_check

KINDS = list(ModelKind)


def _batch(n=4, seed=0):
    rng = make_rng(seed, "test-batch")
    return (rng.random((n, 40, 20)) < 0.3).astype(np.float64)


def _zeros(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def _toy_split():
    """Two classes with disjoint constant patterns."""
    windows = []
    for i in range(48):
        task = TaskId.PICK_AND_PLACE if i % 2 == 0 else TaskId.PEG_BOARD
        x = np.zeros((40, 20))
        if task is TaskId.PICK_AND_PLACE:
            x[:, :10] = 1.0
        else:
            x[:, 10:] = 1.0
        windows.append(EventWindow(x, task, OperatorId.A, f"toy{i:02d}", 0))
    return DatasetSplit(windows[:32], windows[32:])


def _fcn_oracle(params, x):
    """Eval-mode FCN written out layer by layer."""
    h = x.reshape(-1)
    for name in ("dense1", "dense2", "dense3"):
        z = h @ params[f"{name}.W"]
        z = (z - params[f"{name}.bn.mean"]) / np.sqrt(params[f"{name}.bn.var"] + 1e-3)
        z = params[f"{name}.bn.gamma"] * z + params[f"{name}.bn.beta"]
        h = np.maximum(z, 0.0)
    logits = h @ params["out.W"] + params["out.b"]
    e = np.exp(logits - logits.max())
    return e / e.sum()


class TestBuild:
    def test_output_layer_shape(self):
        params = build(ModelSpec(ModelKind.LSTM, 4), seed=0)
        assert params["out.W"].shape == (16, 4)
        assert params["out.b"].shape == (4,)

    @pytest.mark.parametrize("kind", KINDS)
    def test_same_seed_same_params(self, kind):
        spec = ModelSpec(kind, 4)
        a, b = build(spec, 5), build(spec, 5)
        assert a.keys() == b.keys()
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_cnn_parameter_count(self):
        conv = 3 * 20 * 128 + 2 * 128
        dense1 = 128 * 128 + 2 * 128
        dense2 = 128 * 16 + 2 * 16
        out = 16 * 4 + 4
        assert count_params(ModelSpec(ModelKind.CNN, 4)) == conv + dense1 + dense2 + out

    def test_lstm_forget_bias_starts_at_one(self):
        params = build(ModelSpec(ModelKind.LSTM, 4), 0)
        bias = params["lstm1.fw.b"]
        units = bias.size // 4
        assert np.all(bias[units:2 * units] == 1.0)

    def test_invalid_specs(self):
        with pytest.raises(SchemaError):
            ModelSpec(ModelKind.FCN, 4, layer_sizes=(128, 64, 8))
        with pytest.raises(SchemaError):
            ModelSpec(ModelKind.LSTM, 4, layer_sizes=(127, 64, 64, 16))
        with pytest.raises(SchemaError):
            ModelSpec("RNN", 4)
        with pytest.raises(SchemaError):
            ModelSpec(ModelKind.CNN, 1)


class TestForward:
    @pytest.mark.parametrize("kind", KINDS)
    def test_shapes_and_normalization(self, kind):
        spec = ModelSpec(kind, 4)
        result = forward(spec, build(spec, 1), _batch(6))
        assert result.probs.shape == (6, 4)
        assert result.embedding.shape == (6, EMBEDDING_UNITS)
        assert np.allclose(result.probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.all((result.probs > 0) & (result.probs < 1))

    @pytest.mark.parametrize("kind", KINDS)
    def test_zero_weights_give_uniform(self, kind):
        spec = ModelSpec(kind, 4)
        probs = forward(spec, _zeros(build(spec, 0)), _batch()).probs
        assert np.allclose(probs, 0.25, atol=1e-12)

    def test_eval_is_deterministic(self):
        spec = ModelSpec(ModelKind.LSTM, 4)
        params = build(spec, 2)
        x = _batch(3)
        assert np.array_equal(forward(spec, params, x).probs, forward(spec, params, x).probs)

    def test_identical_windows_identical_embeddings(self):
        spec = ModelSpec(ModelKind.CNN, 4)
        x = np.repeat(_batch(1), 2, axis=0)
        emb = forward(spec, build(spec, 0), x).embedding
        assert np.array_equal(emb[0], emb[1])

    def test_wrong_input_shape(self):
        spec = ModelSpec(ModelKind.FCN, 4)
        with pytest.raises(SchemaError):
            forward(spec, build(spec, 0), np.zeros((2, 39, 20)))

    def test_trained_fcn_matches_oracle(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        x = small_split.test[0].x.astype(np.float64)
        probs = forward(spec, params, x[None]).probs[0]
        assert np.max(np.abs(probs - _fcn_oracle(params, x))) <= 1e-9


class TestLossAndGrads:
    def test_uniform_loss_is_log_classes(self):
        spec = ModelSpec(ModelKind.FCN, 4)
        loss, _ = loss_and_grads(spec, _zeros(build(spec, 0)), _batch(), [0, 1, 2, 3], train=False)
        assert loss == pytest.approx(math.log(4), abs=1e-12)

    def test_output_bias_gradient(self):
        spec = ModelSpec(ModelKind.FCN, 4)
        y = np.array([0, 0, 1, 3])
        _, grads = loss_and_grads(spec, _zeros(build(spec, 0)), _batch(), y, train=False)
        expected = (np.full((4, 4), 0.25) - np.eye(4)[y]).mean(axis=0)
        assert np.allclose(grads["out.b"], expected, atol=1e-12)

    def test_labels_out_of_range(self):
        spec = ModelSpec(ModelKind.FCN, 4)
        with pytest.raises(SchemaError):
            loss_and_grads(spec, build(spec, 0), _batch(), [0, 1, 2, 4])

    @pytest.mark.parametrize("kind", KINDS)
    def test_gradients_match_finite_differences(self, kind):
        spec = ModelSpec(kind, 4)
        report = network_grad_check(spec, _batch(), np.array([0, 1, 2, 3]), seed=0, max_coords=8)
        trainable = {k for k in build(spec, 0) if not k.endswith((".mean", ".var"))}
        assert set(report) == trainable
        assert max(report.values()) < 1e-4

    def test_every_fcn_coordinate(self):
        spec = ModelSpec(ModelKind.FCN, 4, COMPACT_SHAPE, COMPACT_FCN_SIZES, dropout_rate=0.0, batchnorm=False)
        x = _batch()[:, :COMPACT_SHAPE[0], :COMPACT_SHAPE[1]]
        report = network_grad_check(spec, x, np.array([0, 1, 2, 3]), seed=0, max_coords=None)
        assert set(report) == set(build(spec, 0))
        assert max(report.values()) < 1e-4


class TestBiLSTM:
    def _tied(self, seed=0):
        layer = BiLSTM("lstm1", 20, 6, return_sequences=True)
        params = layer.init(make_rng(seed, "bilstm-tied"))
        for part in ("Wx", "Wh", "b"):
            params[f"lstm1.bw.{part}"] = params[f"lstm1.fw.{part}"].copy()
        return layer, params

    def test_backward_direction_is_forward_on_reversed_input(self):
        layer, params = self._tied()
        x = _batch(3)
        y, _ = layer.forward(x, params, train=False)
        hs, _ = lstm_forward(x[:, ::-1], params["lstm1.fw.Wx"], params["lstm1.fw.Wh"], params["lstm1.fw.b"])
        assert np.allclose(y[:, ::-1, 6:], hs, atol=1e-12)

    def test_reversed_input_swaps_directions(self):
        layer, params = self._tied(1)
        x = _batch(2, seed=1)
        y, _ = layer.forward(x, params, train=False)
        y_rev, _ = layer.forward(x[:, ::-1], params, train=False)
        assert np.allclose(y[:, :, 6:], y_rev[:, ::-1, :6], atol=1e-12)
        assert np.allclose(y[:, :, :6], y_rev[:, ::-1, 6:], atol=1e-12)


class TestTraining:
    def test_separable_toy_problem(self):
        spec = ModelSpec(ModelKind.FCN, 4)
        cfg = TrainConfig(max_epochs=20, patience=20, batch_size=16, seed=0)
        _, history = train(spec, _toy_split(), cfg, "task")
        assert max(history.train_accuracy) >= 0.99

    def test_history_length_equals_epochs(self, trained_fcn):
        _, _, history = trained_fcn
        assert len(history) == history.epoch[-1] == len(history.to_frame())
        assert history.best_test_accuracy == max(history.test_accuracy)

    def test_best_params_reproduce_best_accuracy(self, trained_fcn, small_split):
        spec, params, history = trained_fcn
        assert evaluate(spec, params, small_split.test, "task").accuracy == history.best_test_accuracy

    def test_training_is_deterministic(self, small_split, quick_train_config, trained_fcn):
        spec, params, _ = trained_fcn
        again, _ = train(spec, small_split, quick_train_config, "task")
        assert all(np.array_equal(params[k], again[k]) for k in params)

    def test_non_finite_loss_raises(self, small_split):
        spec = ModelSpec(ModelKind.FCN, 4)
        params = build(spec, 0)
        params["out.b"] = np.full(4, np.nan)
        with pytest.raises(TrainingError) as info:
            train(spec, small_split, TrainConfig(max_epochs=1), "task", params=params)
        assert info.value.exit_code == 4


class TestEvaluate:
    def test_zero_model_predicts_first_class(self, small_split):
        spec = ModelSpec(ModelKind.FCN, 4)
        result = evaluate(spec, _zeros(build(spec, 0)), small_split.test, "task")
        _, y = stack_windows(small_split.test, "task", class_names("task"))
        assert np.all(result.predictions == 0)
        assert result.accuracy == pytest.approx(float(np.mean(y == 0)))

    def test_perfect_predictions(self):
        windows = _toy_split().test
        classes = class_names("task")
        _, y = stack_windows(windows, "task", classes)
        result = summarize_predictions(y.copy(), y, np.eye(4)[y], windows, classes)
        assert result.accuracy == 1.0
        assert result.exercise_accuracy == 1.0

    def test_exercise_vote_overrides_single_window(self, small_split):
        windows = [w for w in small_split.test if w.log_id == small_split.test[0].log_id]
        classes = class_names("task")
        _, y = stack_windows(windows, "task", classes)
        preds = y.copy()
        preds[0] = (y[0] + 1) % 4
        result = summarize_predictions(preds, y, np.eye(4)[preds], windows, classes)
        assert result.accuracy == pytest.approx(1.0 - 1.0 / len(windows))
        assert result.exercise_accuracy == 1.0

    def test_majority_vote_ties_go_to_lowest_class(self):
        assert majority_vote([2, 1, 1, 2, 3], ["g"] * 5) == {"g": 1}
        assert majority_vote([3, 0, 3], ["a", "b", "a"]) == {"a": 3, "b": 0}

    def test_unknown_target(self):
        with pytest.raises(InputError):
            class_names("surgeon")


class TestSerialization:
    def test_round_trip_is_bit_exact(self, tmp_path):
        spec = ModelSpec(ModelKind.LSTM, 4)
        params = build(spec, 9)
        path = save(spec, params, tmp_path / "m.json", metrics={"best_test_accuracy": 0.5})
        spec2, params2, envelope = load(path)
        assert spec2 == spec
        assert all(np.array_equal(params[k], params2[k]) for k in params)
        x = _batch(2)
        assert np.array_equal(predict_batches(spec, params, x).probs, predict_batches(spec2, params2, x).probs)
        assert envelope["metrics"]["best_test_accuracy"] == 0.5

    def test_save_is_byte_stable(self, tmp_path, trained_fcn):
        spec, params, _ = trained_fcn
        a = save(spec, params, tmp_path / "a.json").read_bytes()
        b = save(spec, params, tmp_path / "b.json").read_bytes()
        assert a == b

    def test_truncated_file(self, tmp_path):
        spec = ModelSpec(ModelKind.FCN, 4)
        path = save(spec, build(spec, 0), tmp_path / "m.json")
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(FormatError):
            load(path)

    def test_shapes_must_match_spec(self, tmp_path):
        spec = ModelSpec(ModelKind.FCN, 4)
        path = save(spec, build(spec, 0), tmp_path / "m.json")
        envelope = json.loads(path.read_text())
        envelope["spec"]["layer_sizes"] = [64, 64, 16]
        path.write_text(json.dumps(envelope))
        with pytest.raises(FormatError):
            load(path)

    def test_unsupported_version(self, tmp_path):
        spec = ModelSpec(ModelKind.FCN, 4)
        path = save(spec, build(spec, 0), tmp_path / "m.json")
        envelope = json.loads(path.read_text())
        envelope["format_version"] = 99
        path.write_text(json.dumps(envelope))
        with pytest.raises(FormatError):
            load(path)

    def test_missing_file_names_train(self, tmp_path):
        with pytest.raises(DependencyError) as info:
            load(tmp_path / "absent.json")
        assert info.value.command == "train"
