"""
Checked dense operations on float64 arrays.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. The helpers here
add the shape and finiteness checks the rest of the package relies on.
"""

import numpy as np

from kinspike.errors import NumericError, SchemaError


def as_tensor(data, shape=None) -> np.ndarray:
    """Copy ``data`` into a float64 array, optionally checking its shape."""
    arr = np.array(data, dtype=np.float64)
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise SchemaError(f"expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def check_finite(name: str, arr) -> np.ndarray:
    """Raise NumericError if ``arr`` contains NaN or infinity."""
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product of an (m, k) and a (k, n) array."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise SchemaError(f"matmul expects 2-d operands, got {a.ndim}-d and {b.ndim}-d")
    if a.shape[1] != b.shape[0]:
        raise SchemaError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = a @ b
    return check_finite("matmul result", out)
