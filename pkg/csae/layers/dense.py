from typing import Optional, Tuple

import numpy as np

from csae.errors import TensorShapeError
from csae.layers.base import Layer, LayerParams, LayerSpec, glorot_uniform


def dense_forward(params: LayerParams, x: np.ndarray) -> np.ndarray:
    """x . W + bias for x of shape [batch, in] and W of shape [in, out]."""
    if x.ndim != 2 or x.shape[1] != params.weights.shape[0]:
        raise TensorShapeError(
            f"Dense layer expects [batch, {params.weights.shape[0]}], got {x.shape}"
        )
    out = x @ params.weights
    if params.bias is not None:
        out = out + params.bias
    return out


def dense_backward(
    params: LayerParams, x: np.ndarray, grad_out: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    if grad_out.shape != (x.shape[0], params.weights.shape[1]):
        raise TensorShapeError(f"Dense gradient shape {grad_out.shape} does not match output")
    grad_x = grad_out @ params.weights.T
    grad_w = x.T @ grad_out
    grad_b = grad_out.sum(axis=0) if params.bias is not None else None
    return grad_x, grad_w, grad_b


class Dense(Layer):
    @classmethod
    def build(cls, spec: LayerSpec, input_shape, rng, dtype):
        if len(input_shape) != 1:
            raise TensorShapeError(f"{spec.name}: dense input must be flat, got {input_shape}")
        fan_in, fan_out = input_shape[0], spec.units
        weights = glorot_uniform(rng, (fan_in, fan_out), fan_in, fan_out, dtype)
        bias = np.zeros(fan_out, dtype=dtype) if spec.use_bias else None
        return cls(spec, LayerParams(weights, bias))

    def output_shape(self, input_shape):
        return (self.params.weights.shape[1],)

    def forward(self, x):
        self._cache = x
        return dense_forward(self.params, x)

    def backward(self, grad_out):
        grad_x, grad_w, grad_b = dense_backward(self.params, self._cached(), grad_out)
        self.grads = (grad_w, grad_b)
        return grad_x
