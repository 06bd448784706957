"""
Latent embedding of the 16-unit penultimate layer.

Windows are run through the eval-mode network, their penultimate activations
are decomposed to 2-d with t-SNE, and each point keeps its ground-truth label
so per-class dispersion can be compared.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from kinspike.analysis.tsne import MAX_POINTS, tsne_with_stats
from kinspike.encoding.windows import EventWindow
from kinspike.errors import InputError
from kinspike.nets.layers import Params
from kinspike.nets.models import predict_batches
from kinspike.nets.spec import ModelSpec
from kinspike.numcore.rng import make_rng

logger = logging.getLogger(__name__)

EMBEDDING_COLUMNS = ["x", "y", "label", "source", "log_id"]


@dataclass(frozen=True, eq=False)
class EmbeddingPlot:
    coords: np.ndarray
    labels: np.ndarray
    sources: np.ndarray
    log_ids: np.ndarray
    vectors: np.ndarray
    target: str
    config: Dict = field(default_factory=dict)
    kl_initial: float = 0.0
    kl_final: float = 0.0
    entropy_error: float = 0.0

    def __len__(self) -> int:
        return int(self.coords.shape[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "x": self.coords[:, 0],
            "y": self.coords[:, 1],
            "label": self.labels,
            "source": self.sources,
            "log_id": self.log_ids,
        }, columns=EMBEDDING_COLUMNS)

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path


def embedding_vectors(spec: ModelSpec, params: Params, windows: Sequence[EventWindow]) -> np.ndarray:
    """Eval-mode penultimate activations, one 16-dim row per window."""
    if not windows:
        raise InputError("no windows to embed")
    x = np.stack([w.x for w in windows]).astype(np.float64)
    return predict_batches(spec, params, x).embedding


def embed(
    spec: ModelSpec,
    params: Params,
    windows: Sequence[EventWindow],
    target: str = "task",
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int = 42,
    init: str = "random",
    max_points: int = MAX_POINTS,
    sources: Optional[Sequence[str]] = None,
) -> EmbeddingPlot:
    """
    Embed windows in 2-d.

    Args:
        spec, params: trained model
        windows: windows to embed (test windows by default in the CLI)
        target: label attached to each point ("task" or "operator")
        perplexity, iters, seed, init: t-SNE settings
        max_points: windows beyond this are subsampled with a seeded draw
        sources: per-window partition name ("train"/"test"); "test" if omitted
    """
    windows = list(windows)
    sources = list(sources) if sources is not None else ["test"] * len(windows)
    if len(sources) != len(windows):
        raise InputError(f"{len(sources)} sources for {len(windows)} windows")
    cap = min(max_points, MAX_POINTS)
    if len(windows) > cap:
        keep = np.sort(make_rng(seed, "embed-subsample").choice(len(windows), size=cap, replace=False))
        logger.info(f"Subsampling {len(windows)} windows to {cap} for t-SNE")
        windows = [windows[i] for i in keep]
        sources = [sources[i] for i in keep]

    n = len(windows)
    if n < 3:
        raise InputError(f"t-SNE needs at least 3 windows, got {n}")
    effective = perplexity
    if perplexity > n - 1:
        effective = max((n - 1) / 3.0, 1.0)
        logger.warning(f"perplexity {perplexity} > N - 1 for {n} points; using {effective:.3g}")

    logger.info(f"=== Starting Embedding: kind={spec.kind.value} windows={n} target={target} ===")
    vectors = embedding_vectors(spec, params, windows)
    result = tsne_with_stats(vectors, effective, iters, seed, init)
    labels = np.array([w.label(target) for w in windows], dtype=object)
    return EmbeddingPlot(
        coords=result.coords,
        labels=labels,
        sources=np.array(sources, dtype=object),
        log_ids=np.array([w.log_id for w in windows], dtype=object),
        vectors=vectors,
        target=target,
        config={"perplexity": effective, "iters": iters, "seed": seed, "init": init},
        kl_initial=result.kl_initial,
        kl_final=result.kl_final,
        entropy_error=float(np.max(np.abs(result.entropies - np.log(effective)))),
    )


def _class_points(plot: EmbeddingPlot) -> Dict[str, np.ndarray]:
    groups = {}
    for label in sorted(set(plot.labels)):
        groups[label] = plot.coords[plot.labels == label]
    if len(groups) < 2:
        raise InputError("dispersion statistics need at least 2 classes")
    return groups


def spread_stats(plot: EmbeddingPlot) -> pd.DataFrame:
    """Per-class mean distance to the class centroid, smallest first."""
    rows = []
    for label, points in _class_points(plot).items():
        centroid = points.mean(axis=0)
        rows.append({
            "label": label,
            "count": len(points),
            "dispersion": float(np.mean(np.linalg.norm(points - centroid, axis=1))),
        })
    return pd.DataFrame(rows).sort_values(["dispersion", "label"], kind="mergesort").reset_index(drop=True)


def separation_ratio(plot: EmbeddingPlot) -> float:
    """Mean pairwise centroid distance over mean within-class dispersion (> 1 means separated)."""
    groups = _class_points(plot)
    centroids = np.stack([p.mean(axis=0) for p in groups.values()])
    diffs = centroids[:, None, :] - centroids[None, :, :]
    k = len(centroids)
    between = np.linalg.norm(diffs, axis=2)[np.triu_indices(k, 1)].mean()
    within = float(spread_stats(plot)["dispersion"].mean())
    return float(between / within) if within > 0 else float("inf")
