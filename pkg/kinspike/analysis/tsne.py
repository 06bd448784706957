"""
Exact t-SNE.

Gaussian conditional affinities are calibrated per point by binary search on
the precision until the row entropy (natural log) is within ``tol`` of
log(perplexity). The symmetrized affinities are matched by a Student-t
kernel in 2-d through gradient descent with momentum (0.5, then 0.8 from
iteration 250), per-coordinate gains, and early exaggeration x12 for the first
250 iterations. The layout is kept centred at the origin.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from kinspike.errors import InputError
from kinspike.numcore.rng import make_rng
from kinspike.numcore.tensor import check_finite

logger = logging.getLogger(__name__)

MAX_POINTS = 5000
EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_SWITCH = 250
LEARNING_RATE = 200.0
MIN_GAIN = 0.01
INIT_SCALE = 1e-4


@dataclass(frozen=True, eq=False)
class TsneResult:
    coords: np.ndarray
    kl_initial: float
    kl_final: float
    entropies: np.ndarray
    perplexity: float
    iters: int
    seed: int


def squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def check_perplexity(perplexity: float, n: int):
    if not 0 < perplexity <= n - 1:
        raise InputError(f"perplexity must lie in (0, N - 1 = {n - 1}], got {perplexity}")


def _row_affinities(d: np.ndarray, beta: float) -> Tuple[np.ndarray, float]:
    shifted = d - d.min()
    p = np.exp(-shifted * beta)
    total = p.sum()
    entropy = np.log(total) + beta * np.sum(shifted * p) / total
    return p / total, float(entropy)


def conditional_affinities(x: np.ndarray, perplexity: float, tol: float = 1e-4, max_tries: int = 200):
    """
    Per-row Gaussian affinities p_{j|i} matched to the target perplexity.

    The highest reachable row entropy is log(N - 1), so perplexity must lie in
    (0, N - 1].

    Returns:
        (P, entropies): P is N x N with zero diagonal and rows summing to 1
    """
    n = x.shape[0]
    check_perplexity(perplexity, n)
    d = squared_distances(x)
    target = np.log(perplexity)
    p_cond = np.zeros((n, n))
    entropies = np.zeros(n)
    missed = 0

    for i in range(n):
        others = np.concatenate([d[i, :i], d[i, i + 1:]])
        beta, lo, hi = 1.0, 0.0, np.inf
        row, entropy = _row_affinities(others, beta)
        for _ in range(max_tries):
            diff = entropy - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
            row, entropy = _row_affinities(others, beta)
        if abs(entropy - target) > tol:
            missed += 1
        p_cond[i, :i] = row[:i]
        p_cond[i, i + 1:] = row[i:]
        entropies[i] = entropy
    if missed:
        logger.warning(f"perplexity search missed the entropy target on {missed} of {n} rows (tol={tol})")
    return p_cond, entropies


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-12)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def _initial_layout(x: np.ndarray, init: str, rng) -> np.ndarray:
    n = x.shape[0]
    if init == "pca":
        centred = x - x.mean(axis=0)
        _, _, vt = np.linalg.svd(centred, full_matrices=False)
        y = centred @ vt[:2].T
        if y.shape[1] < 2:
            y = np.hstack([y, np.zeros((n, 2 - y.shape[1]))])
        std = y[:, 0].std()
        return y / std * INIT_SCALE if std > 0 else rng.standard_normal((n, 2)) * INIT_SCALE
    if init != "random":
        raise InputError(f"unknown t-SNE initialization: {init!r}")
    return rng.standard_normal((n, 2)) * INIT_SCALE


def tsne_with_stats(vectors, perplexity: float = 30.0, iters: int = 1000, seed: int = 0,
                    init: str = "random") -> TsneResult:
    """Run t-SNE and report initial/final KL divergence and the calibrated row entropies."""
    x = check_finite("t-SNE input", np.asarray(vectors, dtype=np.float64))
    if x.ndim != 2:
        raise InputError(f"t-SNE needs an N x D matrix, got shape {x.shape}")
    n = x.shape[0]
    if n < 3:
        raise InputError(f"t-SNE needs at least 3 points, got {n}")
    if n > MAX_POINTS:
        raise InputError(f"exact t-SNE is capped at {MAX_POINTS} points, got {n}")
    check_perplexity(perplexity, n)
    rng = make_rng(seed, "tsne")

    if np.all(np.ptp(x, axis=0) == 0):
        logger.warning(f"t-SNE input has {n} identical points; returning a seeded noise layout")
        y = rng.standard_normal((n, 2)) * INIT_SCALE
        return TsneResult(y - y.mean(axis=0), 0.0, 0.0, np.zeros(n), perplexity, 0, seed)

    p_cond, entropies = conditional_affinities(x, perplexity)
    p = np.maximum((p_cond + p_cond.T) / (2.0 * n), 1e-12)
    np.fill_diagonal(p, 0.0)

    y = _initial_layout(x, init, rng)
    y -= y.mean(axis=0)
    kl_initial = kl_divergence(p, y)
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)

    for it in range(iters):
        exaggeration = EXAGGERATION if it < EXAGGERATION_ITERS else 1.0
        momentum = 0.5 if it < MOMENTUM_SWITCH else 0.8
        num = 1.0 / (1.0 + squared_distances(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        w = (exaggeration * p - q) * num
        grad = 4.0 * (np.diag(w.sum(axis=1)) - w) @ y

        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, MIN_GAIN)
        velocity = momentum * velocity - LEARNING_RATE * gains * grad
        y = y + velocity
        y -= y.mean(axis=0)

    y = check_finite("t-SNE layout", y)
    kl_final = kl_divergence(p, y)
    logger.info(f"stage=tsne points={n} perplexity={perplexity} kl_initial={kl_initial:.4f} kl_final={kl_final:.4f}")
    return TsneResult(y, kl_initial, kl_final, entropies, perplexity, iters, seed)


def tsne(vectors, perplexity: float = 30.0, iters: int = 1000, seed: int = 0, init: str = "random") -> np.ndarray:
    """N x D vectors -> N x 2 layout centred at the origin."""
    return tsne_with_stats(vectors, perplexity, iters, seed, init).coords
