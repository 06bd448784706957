"""Deterministic numeric substrate: seeded streams, checked tensor ops, gradient checking."""

from kinspike.numcore.rng import derive_seed, make_rng
from kinspike.numcore.tensor import check_finite, matmul
from kinspike.numcore.gradcheck import grad_check, grad_check_params

__all__ = [
    "derive_seed",
    "make_rng",
    "check_finite",
    "matmul",
    "grad_check",
    "grad_check_params",
]
