from typing import Tuple

import numpy as np

from csae import config
from csae.errors import LabelRangeError, TensorShapeError


def mse_loss(x_hat: np.ndarray, x: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean over all elements of (x_hat - x)^2, and its gradient wrt x_hat."""
    if x_hat.shape != x.shape:
        raise TensorShapeError(f"MSE operands differ in shape: {x_hat.shape} vs {x.shape}")
    diff = x_hat - x
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(x_hat.dtype, copy=False)


def check_labels(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise LabelRangeError(f"Labels must be a vector, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise LabelRangeError(f"Labels must lie in [0, {num_classes}), got range [{y.min()}, {y.max()}]")
    return y.astype(np.int64, copy=False)


def one_hot(y: np.ndarray, num_classes: int, dtype) -> np.ndarray:
    out = np.zeros((y.shape[0], num_classes), dtype=dtype)
    out[np.arange(y.shape[0]), y] = 1
    return out


def categorical_crossentropy(p: np.ndarray, y: np.ndarray, clip: float = config.CE_CLIP) -> Tuple[float, np.ndarray]:
    """
    Cross-entropy of softmax outputs ``p`` [b, k] against integer labels.

    The returned gradient is taken with respect to the pre-softmax logits:
    (p - onehot(y)) / b. Clipping only guards the log.
    """
    if p.ndim != 2:
        raise TensorShapeError(f"Expected [batch, classes] probabilities, got {p.shape}")
    batch, k = p.shape
    y = check_labels(y, k)
    if y.shape[0] != batch:
        raise TensorShapeError(f"{y.shape[0]} labels for a batch of {batch}")

    picked = np.clip(p[np.arange(batch), y], clip, 1.0 - clip)
    loss = float(-np.mean(np.log(picked)))
    grad = (p - one_hot(y, k, p.dtype)) / batch
    return loss, grad
