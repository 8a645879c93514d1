"""
Dense tensor primitives.

Tensors are numpy arrays; this module adds the shape contracts the rest of
the package relies on. Image tensors are channels-last: [batch, height,
width, channels]. The working precision is float32, the gradient-check
precision float64; both run through the same code paths.
"""

from typing import Optional, Sequence, Union

import numpy as np

from csae import config
from csae.errors import TensorShapeError

_ELEMENTWISE_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def resolve_dtype(dtype=None) -> np.dtype:
    return np.dtype(dtype if dtype is not None else config.WORKING_DTYPE)


def tensor_create(
    shape: Sequence[int],
    fill: Optional[float] = None,
    data: Union[Sequence[float], np.ndarray, None] = None,
    dtype=None,
) -> np.ndarray:
    """Build a tensor of exactly ``shape`` from a fill value or flat row-major data."""
    shape = tuple(int(d) for d in shape)
    if len(shape) < 1 or any(d < 1 for d in shape):
        raise TensorShapeError(f"Shape must have rank >= 1 and positive dims, got {shape}")
    dtype = resolve_dtype(dtype)

    if data is None:
        return np.full(shape, 0.0 if fill is None else fill, dtype=dtype)

    flat = np.asarray(data, dtype=dtype).reshape(-1)
    expected = int(np.prod(shape))
    if flat.size != expected:
        raise TensorShapeError(
            f"Data length {flat.size} does not match shape {shape} ({expected} elements)"
        )
    return flat.reshape(shape).copy()


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise TensorShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise TensorShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


def argmax_rows(a: np.ndarray) -> np.ndarray:
    """Index of the row maximum; ties resolve to the lowest index."""
    if a.ndim != 2 or a.shape[1] < 1:
        raise TensorShapeError(f"argmax_rows expects a [m, n>=1] tensor, got {a.shape}")
    return np.argmax(a, axis=1)


def elementwise(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    """
    Elementwise add/sub/mul of same-shape tensors, or of a tensor and a
    rank-1 bias broadcast along the last axis.
    """
    if op not in _ELEMENTWISE_OPS:
        raise TensorShapeError(f"Unknown elementwise op '{op}'. Available: {list(_ELEMENTWISE_OPS)}")
    same_shape = a.shape == b.shape
    bias_row = b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]
    if not (same_shape or bias_row):
        raise TensorShapeError(f"Cannot combine shapes {a.shape} and {b.shape}")
    return _ELEMENTWISE_OPS[op](a, b)


def all_finite(*arrays: Optional[np.ndarray]) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays if a is not None)
