import numpy as np

from csae.errors import ConfigError
from csae.layers.base import Layer

ACTIVATIONS = ("relu", "sigmoid", "softmax", "linear")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, max-subtracted."""
    shifted = x - x.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def activation_forward(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "softmax":
        return softmax(x)
    if kind == "linear":
        return x
    raise ConfigError(f"Unknown activation '{kind}'. Available: {list(ACTIVATIONS)}")


def activation_backward(kind: str, cached: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """
    Input gradient given the cached forward OUTPUT. For relu the output is
    positive exactly where the input is, so the subgradient at 0 is 0.
    """
    if kind == "relu":
        return grad_out * (cached > 0)
    if kind == "sigmoid":
        return grad_out * cached * (1 - cached)
    if kind == "softmax":
        inner = (grad_out * cached).sum(axis=-1, keepdims=True)
        return cached * (grad_out - inner)
    if kind == "linear":
        return grad_out
    raise ConfigError(f"Unknown activation '{kind}'. Available: {list(ACTIVATIONS)}")


class Activation(Layer):
    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x):
        out = activation_forward(self.spec.kind, x)
        self._cache = out
        return out

    def backward(self, grad_out):
        return activation_backward(self.spec.kind, self._cached(), grad_out)
