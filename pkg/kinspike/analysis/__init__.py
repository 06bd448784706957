"""Confusion matrices, feature ablation, t-SNE embedding and the accuracy comparison grid."""

from kinspike.analysis.ablation import AblationReport, AblationRow, ablate, ablation_sweep, parse_features
from kinspike.analysis.comparison import ComparisonCell, ComparisonTable, SnnSettings, comparison_grid
from kinspike.analysis.confusion import ConfusionMatrix, confusion
from kinspike.analysis.embedding import EmbeddingPlot, embed, separation_ratio, spread_stats
from kinspike.analysis.tsne import TsneResult, tsne, tsne_with_stats

__all__ = [
    "AblationReport",
    "AblationRow",
    "ablate",
    "ablation_sweep",
    "parse_features",
    "ComparisonCell",
    "ComparisonTable",
    "SnnSettings",
    "comparison_grid",
    "ConfusionMatrix",
    "confusion",
    "EmbeddingPlot",
    "embed",
    "separation_ratio",
    "spread_stats",
    "TsneResult",
    "tsne",
    "tsne_with_stats",
]
