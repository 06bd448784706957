"""
Finite-difference gradient checking.

Central differences are compared against analytic gradients with the
symmetric relative error |g_num - g_ana| / max(1e-8, |g_num| + |g_ana|).
"""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from kinspike.errors import NumericError
from kinspike.numcore.rng import make_rng

logger = logging.getLogger(__name__)

ValueAndGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def _finite_value(value) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise NumericError("objective is not finite during gradient check")
    return value


def _coordinates(size: int, max_coords: Optional[int], seed: int, key: str) -> np.ndarray:
    if max_coords is None or max_coords >= size:
        return np.arange(size)
    picked = make_rng(seed, "gradcheck", key).choice(size, size=max_coords, replace=False)
    return np.sort(picked)


def relative_error(numeric: float, analytic: float) -> float:
    return abs(numeric - analytic) / max(1e-8, abs(numeric) + abs(analytic))


def grad_check(
    f: ValueAndGrad,
    p,
    eps: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
    key: str = "vector",
) -> float:
    """
    Compare the analytic gradient of ``f`` at ``p`` with central differences.

    Args:
        f: maps a parameter vector to (value, gradient)
        p: evaluation point
        eps: finite-difference step
        max_coords: check a seeded sample of this many coordinates (all if None)
        seed: seed for the coordinate sample
        key: names the coordinate sample stream

    Returns:
        Maximum relative error over the checked coordinates
    """
    point = np.array(p, dtype=np.float64).ravel()
    value, analytic = f(point.copy())
    _finite_value(value)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    if analytic.shape != point.shape:
        raise NumericError(f"gradient shape {analytic.shape} does not match point {point.shape}")
    if not np.all(np.isfinite(analytic)):
        raise NumericError("analytic gradient is not finite")

    worst = 0.0
    for i in _coordinates(point.size, max_coords, seed, key):
        shifted = point.copy()
        shifted[i] = point[i] + eps
        f_plus = _finite_value(f(shifted)[0])
        shifted[i] = point[i] - eps
        f_minus = _finite_value(f(shifted)[0])
        numeric = (f_plus - f_minus) / (2.0 * eps)
        worst = max(worst, relative_error(numeric, analytic[i]))
    return worst


def grad_check_params(
    loss_and_grads: Callable[[Dict[str, np.ndarray]], Tuple[float, Dict[str, np.ndarray]]],
    params: Dict[str, np.ndarray],
    eps: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """
    Gradient-check every tensor of a named parameter set.

    ``loss_and_grads`` maps a parameter dict to (loss, gradient dict); only
    tensors that appear in the gradient dict are checked. Returns the maximum
    relative error per tensor.
    """
    base = {name: np.array(value, dtype=np.float64) for name, value in params.items()}
    _, grads = loss_and_grads(base)
    report = {}

    for name in grads:
        shape = base[name].shape

        def along(flat, name=name, shape=shape):
            trial = dict(base)
            trial[name] = flat.reshape(shape)
            loss, trial_grads = loss_and_grads(trial)
            return loss, trial_grads[name]

        report[name] = grad_check(along, base[name], eps=eps, max_coords=max_coords, seed=seed, key=name)
        logger.debug(f"gradcheck {name}: {report[name]:.3e}")

    return report
