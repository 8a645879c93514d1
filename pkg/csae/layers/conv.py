"""
Strided 2-D convolution and its transpose, channels-last.

Both use "same" padding: a stride-s convolution maps a side of n to
ceil(n / s), padding max((out - 1) * s + k - n, 0) split floor-before /
ceil-after. The transposed convolution is the exact adjoint of the
convolution over an input side of out * s, so it maps n to n * s.
Kernels are applied as cross-correlation (no flip).

Kernel layouts: conv2d [kh, kw, in_channels, filters];
conv2d_transpose [kh, kw, filters, in_channels].
"""

from typing import Iterator, Optional, Tuple

import numpy as np

from csae.errors import TensorShapeError
from csae.layers.base import Layer, LayerParams, LayerSpec, glorot_uniform

ConvGrads = Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]


def same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """Return (output size, pad before, pad after) for one spatial axis."""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def _taps(kh: int, kw: int, stride: int, oh: int, ow: int) -> Iterator[Tuple[int, int, tuple]]:
    # window of the padded input touched by kernel tap (i, j) across all outputs
    for i in range(kh):
        for j in range(kw):
            yield i, j, (
                slice(None),
                slice(i, i + stride * (oh - 1) + 1, stride),
                slice(j, j + stride * (ow - 1) + 1, stride),
            )


def _check_input(x: np.ndarray, channels: int, what: str):
    if x.ndim != 4:
        raise TensorShapeError(f"{what} expects [batch, height, width, channels], got {x.shape}")
    if x.shape[3] != channels:
        raise TensorShapeError(
            f"{what}: input has {x.shape[3]} channels, kernel expects {channels}"
        )


def conv2d_forward(params: LayerParams, x: np.ndarray, stride: int) -> np.ndarray:
    kernel = params.weights
    kh, kw, c, f = kernel.shape
    _check_input(x, c, "conv2d")
    b, h, w, _ = x.shape
    oh, top, bottom = same_padding(h, kh, stride)
    ow, left, right = same_padding(w, kw, stride)

    xp = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))
    out = np.zeros((b, oh, ow, f), dtype=np.result_type(x, kernel))
    for i, j, window in _taps(kh, kw, stride, oh, ow):
        out += xp[window] @ kernel[i, j]
    if params.bias is not None:
        out += params.bias
    return out


def conv2d_backward(params: LayerParams, x: np.ndarray, grad_out: np.ndarray, stride: int) -> ConvGrads:
    kernel = params.weights
    kh, kw, c, f = kernel.shape
    _check_input(x, c, "conv2d")
    b, h, w, _ = x.shape
    oh, top, bottom = same_padding(h, kh, stride)
    ow, left, right = same_padding(w, kw, stride)
    if grad_out.shape != (b, oh, ow, f):
        raise TensorShapeError(f"conv2d gradient shape {grad_out.shape} != {(b, oh, ow, f)}")

    xp = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))
    grad_xp = np.zeros_like(xp)
    grad_w = np.zeros_like(kernel)
    g_flat = grad_out.reshape(-1, f)
    for i, j, window in _taps(kh, kw, stride, oh, ow):
        grad_w[i, j] = xp[window].reshape(-1, c).T @ g_flat
        grad_xp[window] += grad_out @ kernel[i, j].T

    grad_x = grad_xp[:, top:top + h, left:left + w, :]
    grad_b = grad_out.sum(axis=(0, 1, 2)) if params.bias is not None else None
    return np.ascontiguousarray(grad_x), grad_w, grad_b


def conv2d_transpose_forward(params: LayerParams, x: np.ndarray, stride: int) -> np.ndarray:
    kernel = params.weights
    kh, kw, f, c = kernel.shape
    _check_input(x, c, "conv2d_transpose")
    b, h, w, _ = x.shape
    out_h, out_w = h * stride, w * stride
    _, top, bottom = same_padding(out_h, kh, stride)
    _, left, right = same_padding(out_w, kw, stride)

    out_p = np.zeros((b, out_h + top + bottom, out_w + left + right, f), dtype=np.result_type(x, kernel))
    for i, j, window in _taps(kh, kw, stride, h, w):
        out_p[window] += x @ kernel[i, j].T
    out = np.ascontiguousarray(out_p[:, top:top + out_h, left:left + out_w, :])
    if params.bias is not None:
        out += params.bias
    return out


def conv2d_transpose_backward(
    params: LayerParams, x: np.ndarray, grad_out: np.ndarray, stride: int
) -> ConvGrads:
    kernel = params.weights
    kh, kw, f, c = kernel.shape
    _check_input(x, c, "conv2d_transpose")
    b, h, w, _ = x.shape
    out_h, out_w = h * stride, w * stride
    if grad_out.shape != (b, out_h, out_w, f):
        raise TensorShapeError(
            f"conv2d_transpose gradient shape {grad_out.shape} != {(b, out_h, out_w, f)}"
        )
    _, top, bottom = same_padding(out_h, kh, stride)
    _, left, right = same_padding(out_w, kw, stride)

    gp = np.pad(grad_out, ((0, 0), (top, bottom), (left, right), (0, 0)))
    grad_x = np.zeros_like(x, dtype=np.result_type(x, kernel))
    grad_w = np.zeros_like(kernel)
    x_flat = x.reshape(-1, c)
    for i, j, window in _taps(kh, kw, stride, h, w):
        patch = gp[window]
        grad_x += patch @ kernel[i, j]
        grad_w[i, j] = patch.reshape(-1, f).T @ x_flat

    grad_b = grad_out.sum(axis=(0, 1, 2)) if params.bias is not None else None
    return grad_x, grad_w, grad_b


class Conv2D(Layer):
    @classmethod
    def build(cls, spec: LayerSpec, input_shape, rng, dtype):
        if len(input_shape) != 3:
            raise TensorShapeError(f"{spec.name}: conv2d input must be [h, w, c], got {input_shape}")
        kh, kw = spec.kernel
        c, f = input_shape[2], spec.filters
        weights = glorot_uniform(rng, (kh, kw, c, f), kh * kw * c, kh * kw * f, dtype)
        bias = np.zeros(f, dtype=dtype) if spec.use_bias else None
        return cls(spec, LayerParams(weights, bias))

    def output_shape(self, input_shape):
        h, w, _ = input_shape
        s = self.spec.stride
        return (-(-h // s), -(-w // s), self.params.weights.shape[3])

    def forward(self, x):
        self._cache = x
        return conv2d_forward(self.params, x, self.spec.stride)

    def backward(self, grad_out):
        grad_x, grad_w, grad_b = conv2d_backward(self.params, self._cached(), grad_out, self.spec.stride)
        self.grads = (grad_w, grad_b)
        return grad_x


class Conv2DTranspose(Layer):
    @classmethod
    def build(cls, spec: LayerSpec, input_shape, rng, dtype):
        if len(input_shape) != 3:
            raise TensorShapeError(
                f"{spec.name}: conv2d_transpose input must be [h, w, c], got {input_shape}"
            )
        kh, kw = spec.kernel
        c, f = input_shape[2], spec.filters
        weights = glorot_uniform(rng, (kh, kw, f, c), kh * kw * f, kh * kw * c, dtype)
        bias = np.zeros(f, dtype=dtype) if spec.use_bias else None
        return cls(spec, LayerParams(weights, bias))

    def output_shape(self, input_shape):
        h, w, _ = input_shape
        s = self.spec.stride
        return (h * s, w * s, self.params.weights.shape[2])

    def forward(self, x):
        self._cache = x
        return conv2d_transpose_forward(self.params, x, self.spec.stride)

    def backward(self, grad_out):
        grad_x, grad_w, grad_b = conv2d_transpose_backward(
            self.params, self._cached(), grad_out, self.spec.stride
        )
        self.grads = (grad_w, grad_b)
        return grad_x
