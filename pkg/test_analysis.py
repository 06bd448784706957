#!/usr/bin/env python3
"""
Analysis Tests
Confusion matrices, t-SNE, latent embedding statistics, ablation, the
comparison grid and the SVG plots.
"""

import logging
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from kinspike.analysis import (
    ComparisonTable,
    EmbeddingPlot,
    SnnSettings,
    ablate,
    ablation_sweep,
    comparison_grid,
    confusion,
    embed,
    separation_ratio,
    spread_stats,
    tsne,
)
from kinspike.analysis.ablation import ablation_seeds, parse_features
from kinspike.analysis.confusion import ConfusionMatrix
from kinspike.analysis.tsne import conditional_affinities, tsne_with_stats
from kinspike.errors import InputError, SchemaError
from kinspike.nets.spec import ModelKind, ModelSpec, TrainConfig
from kinspike.nets.trainer import class_names, evaluate
from kinspike.numcore.rng import make_rng
from kinspike.viz.plots import (
    EMBEDDING_GID,
    create_ablation_chart,
    create_comparison_chart,
    create_confusion_heatmap,
    create_embedding_scatter,
)

SVG = "{http://www.w3.org/2000/svg}"
TASKS = class_names("task")


def _plot(coords, labels) -> EmbeddingPlot:
    n = len(labels)
    return EmbeddingPlot(
        coords=np.asarray(coords, dtype=np.float64),
        labels=np.array(labels, dtype=object),
        sources=np.array(["test"] * n, dtype=object),
        log_ids=np.array([f"log{i}" for i in range(n)], dtype=object),
        vectors=np.zeros((n, 16)),
        target="task",
    )


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        labels = [0, 1, 2, 3, 3, 1]
        matrix = confusion(labels, labels, TASKS)
        assert np.array_equal(matrix.counts, np.diag([1, 2, 1, 2]))
        assert matrix.accuracy == 1.0

    def test_single_wrong_window(self):
        matrix = confusion(["PegBoard"], ["PickAndPlace"], TASKS)
        assert matrix.counts.sum() == 1
        assert matrix.counts[0, 1] == 1
        assert matrix.most_confused() == ("PickAndPlace", "PegBoard", 1)

    def test_unknown_label(self):
        with pytest.raises(InputError):
            confusion(["Suturing"], ["PegBoard"], TASKS)
        with pytest.raises(InputError):
            confusion([4], [0], TASKS)

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            confusion([0, 1], [0], TASKS)

    def test_trace_over_total_is_accuracy(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        result = evaluate(spec, params, small_split.test, "task")
        matrix = confusion(result.predictions, result.labels, result.classes)
        assert matrix.total == len(small_split.test)
        assert matrix.accuracy == pytest.approx(result.accuracy, abs=1e-12)

    def test_csv_round_trip(self, tmp_path):
        matrix = confusion([0, 1, 1, 2], [0, 1, 2, 2], ["A", "B", "C"])
        back = ConfusionMatrix.read_csv(matrix.to_csv(tmp_path / "c.csv"))
        assert back.classes == ("A", "B", "C")
        assert np.array_equal(back.counts, matrix.counts)
        assert back.per_class_recall() == {"A": 1.0, "B": 1.0, "C": 0.5}

    def test_mismatched_csv(self, tmp_path):
        path = tmp_path / "c.csv"
        pd.DataFrame({"truth": ["A", "C"], "A": [1, 0], "B": [0, 1]}).to_csv(path, index=False)
        with pytest.raises(SchemaError):
            ConfusionMatrix.read_csv(path)


class TestTsne:
    def test_conditional_rows_sum_to_one(self):
        x = make_rng(0, "tsne-rows").standard_normal((60, 16))
        p, entropies = conditional_affinities(x, 10.0)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(np.diag(p) == 0.0)
        assert np.max(np.abs(entropies - np.log(10.0))) <= 1e-4

    def test_equilateral_input_stays_equilateral(self):
        y = tsne(np.eye(3) * 5.0, perplexity=2.0, iters=1000, seed=0)
        d = [np.linalg.norm(y[i] - y[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
        assert max(d) / min(d) <= 1.05

    def test_kl_decreases(self):
        x = make_rng(1, "tsne-kl").standard_normal((500, 16))
        result = tsne_with_stats(x, perplexity=30.0, iters=300, seed=1)
        assert result.kl_final < result.kl_initial
        assert result.coords.shape == (500, 2)
        assert np.allclose(result.coords.mean(axis=0), 0.0, atol=1e-9)

    def test_deterministic(self):
        x = make_rng(2, "tsne-det").standard_normal((40, 16))
        assert np.array_equal(tsne(x, 5.0, 100, seed=3), tsne(x, 5.0, 100, seed=3))

    def test_pca_initialization(self):
        x = make_rng(2, "tsne-pca").standard_normal((40, 16))
        assert tsne(x, 5.0, 50, seed=0, init="pca").shape == (40, 2)
        with pytest.raises(InputError):
            tsne(x, 5.0, 50, seed=0, init="spectral")

    def test_identical_points_warn(self, caplog):
        with caplog.at_level(logging.WARNING, logger="kinspike.analysis.tsne"):
            y = tsne(np.ones((10, 16)), perplexity=3.0, iters=10)
        assert y.shape == (10, 2)
        assert np.all(np.isfinite(y))
        assert "identical points" in caplog.text

    def test_invalid_inputs(self):
        with pytest.raises(InputError):
            tsne(np.zeros((2, 16)), perplexity=1.0)
        with pytest.raises(InputError):
            tsne(np.random.default_rng(0).standard_normal((10, 16)), perplexity=10.0)
        with pytest.raises(InputError):
            tsne(np.zeros(16), perplexity=1.0)

    def test_unreachable_perplexity_rejected(self):
        x = make_rng(5, "tsne-bound").standard_normal((5, 4))
        with pytest.raises(InputError):
            conditional_affinities(x, 4.5)
        with pytest.raises(InputError):
            tsne(x, perplexity=4.5, iters=10)
        p, _ = conditional_affinities(x, 4.0 - 1e-3)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


class TestEmbedding:
    def test_embed_test_windows(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        plot = embed(spec, params, small_split.test, perplexity=5.0, iters=260, seed=1)
        assert len(plot) == len(small_split.test)
        assert plot.vectors.shape == (len(small_split.test), 16)
        assert set(plot.labels) == set(TASKS)
        assert list(plot.to_frame().columns) == ["x", "y", "label", "source", "log_id"]
        assert plot.kl_final < plot.kl_initial

    def test_perplexity_falls_back_on_small_sets(self, trained_fcn, small_split, caplog):
        spec, params, _ = trained_fcn
        with caplog.at_level(logging.WARNING, logger="kinspike.analysis.embedding"):
            plot = embed(spec, params, small_split.test[:10], perplexity=30.0, iters=50)
        assert plot.config["perplexity"] == 3.0
        assert "perplexity" in caplog.text

    def test_subsampling_respects_cap(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        plot = embed(spec, params, small_split.test, perplexity=5.0, iters=20, max_points=25)
        assert len(plot) == 25

    def test_operator_labels(self, trained_fcn, small_split):
        spec, params, _ = trained_fcn
        plot = embed(spec, params, small_split.test[:30], target="operator", perplexity=5.0, iters=20)
        assert set(plot.labels) <= {"A", "B", "C", "D"}

    def test_identical_class_has_zero_dispersion(self):
        stats = spread_stats(_plot([[1, 1], [1, 1], [0, 0], [4, 0]], ["A", "A", "B", "B"]))
        assert stats.iloc[0]["label"] == "A"
        assert stats.iloc[0]["dispersion"] == 0.0
        assert stats.iloc[1]["dispersion"] == pytest.approx(2.0)

    def test_dispersion_translation_invariant(self):
        coords = make_rng(3, "spread").standard_normal((40, 2))
        labels = ["A", "B", "C", "D"] * 10
        a = spread_stats(_plot(coords, labels))
        b = spread_stats(_plot(coords + np.array([100.0, -7.5]), labels))
        assert list(a["label"]) == list(b["label"])
        assert np.allclose(a["dispersion"], b["dispersion"], atol=1e-9)

    def test_separated_clusters(self):
        rng = make_rng(4, "clusters")
        centres = np.array([[0, 0], [20, 0], [0, 20], [20, 20]], dtype=np.float64)
        coords = np.concatenate([c + rng.standard_normal((10, 2)) for c in centres])
        labels = [label for label in "ABCD" for _ in range(10)]
        assert separation_ratio(_plot(coords, labels)) > 1.0

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            spread_stats(_plot([[0, 0], [1, 1], [2, 2]], ["A", "A", "A"]))


class TestAblation:
    def test_parse_features(self):
        assert parse_features("all") == list(range(20))
        assert parse_features("0, 9") == [0, 9]
        assert parse_features("Tool Left Z") == [12]
        with pytest.raises(InputError):
            parse_features("20")

    def test_seeds(self):
        assert ablation_seeds(42, 3) == (42, 43, 44)

    def test_single_row(self, small_logs, small_encoder):
        spec = ModelSpec(ModelKind.FCN, 4)
        cfg = TrainConfig(max_epochs=1, patience=1, seed=1)
        row = ablate(small_logs, 0, spec, cfg, small_encoder, seeds=(1,), target="task")
        assert row.feature == "Tool Camera Pitch"
        assert row.delta == pytest.approx(row.baseline_accuracy - row.ablated_accuracy)
        assert 0.0 <= row.ablated_accuracy <= 1.0
        assert row.to_dict()["seeds"] == "1"

    def test_sweep_shares_baseline(self, small_logs, small_encoder):
        spec = ModelSpec(ModelKind.FCN, 4)
        cfg = TrainConfig(max_epochs=1, patience=1, seed=1)
        report = ablation_sweep(small_logs, spec, cfg, small_encoder, seeds=(1,), features=[0, 12])
        frame = report.to_frame()
        assert list(frame["feature_index"]) == [0, 12]
        assert frame["baseline_accuracy"].nunique() == 1
        assert len(report) == 2

    def test_feature_out_of_range(self, small_logs, small_encoder):
        with pytest.raises(InputError):
            ablate(small_logs, 20, ModelSpec(ModelKind.FCN, 4), TrainConfig(max_epochs=1), small_encoder)


class TestComparison:
    def test_grid_cell(self, small_logs, small_encoder):
        specs = {"FCN": ModelSpec(ModelKind.FCN, 4)}
        cfg = TrainConfig(max_epochs=1, patience=1, seed=1)
        table = comparison_grid(small_logs, {"event": small_encoder}, specs, cfg,
                                SnnSettings(steps=50), "task", seeds=(1,))
        assert isinstance(table, ComparisonTable)
        cell = table.cell("FCN", "event")
        assert cell.accuracy_gap == pytest.approx(cell.base_accuracy - cell.snn_accuracy)
        assert 0.0 <= cell.agreement <= 1.0
        assert cell.synaptic_events > 0
        assert list(table.to_frame()["mode"]) == ["event"]
        with pytest.raises(InputError):
            table.cell("LSTM", "raw")


class TestPlots:
    def test_embedding_scatter_has_one_marker_per_point(self, tmp_path):
        coords = make_rng(5, "scatter").standard_normal((37, 2))
        plot = _plot(coords, (["A", "B", "C"] * 13)[:37])
        path = create_embedding_scatter(plot, tmp_path / "embedding.svg")
        root = ET.parse(path).getroot()
        groups = [g for g in root.iter(f"{SVG}g") if g.get("id") == EMBEDDING_GID]
        assert len(groups) == 1
        assert len(list(groups[0].iter(f"{SVG}use"))) == 37

    def test_svg_is_byte_stable(self, tmp_path):
        matrix = confusion([0, 1, 2, 3], [0, 1, 3, 3], TASKS)
        a = create_confusion_heatmap(matrix, tmp_path / "a.svg").read_bytes()
        b = create_confusion_heatmap(matrix, tmp_path / "b.svg").read_bytes()
        assert a == b

    def test_ablation_and_comparison_charts(self, tmp_path):
        ablation = pd.DataFrame({"feature": ["Tool Left Z", "Tool Camera X"], "delta": [0.05, 0.0]})
        comparison = pd.DataFrame({
            "kind": ["FCN", "FCN"], "mode": ["event", "raw"],
            "base_accuracy": [0.8, 0.7], "snn_accuracy": [0.79, 0.7],
        })
        for path in (
            create_ablation_chart(ablation, tmp_path / "ablation.svg"),
            create_comparison_chart(comparison, tmp_path / "comparison.svg"),
        ):
            assert ET.parse(path).getroot().tag == f"{SVG}svg"
