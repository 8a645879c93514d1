"""
Central finite-difference checks of every backward pass, run in float64.

A layer is checked through the scalar loss L = sum(forward(x) * R) with a
fixed random projection R, so backward(R) must reproduce dL/dx and the
parameter gradients. Errors are reported as

    max |analytic - numeric| / max(1, |analytic| + |numeric|)

over every input and parameter element.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from csae import config
from csae.errors import NonFiniteError
from csae.layers import LayerSpec, build_layer
from csae.layers.activations import softmax
from csae.losses import categorical_crossentropy, mse_loss
from csae.tensor import all_finite

CHECK_BATCH = 2


@dataclass
class GradcheckResult:
    case: str
    seed: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


@dataclass(frozen=True)
class GradcheckCase:
    name: str
    spec: Optional[LayerSpec]
    input_shape: Tuple[int, ...]
    tolerance: float


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if not all_finite(analytic, numeric):
        raise NonFiniteError("Gradient check produced non-finite values")
    if analytic.size == 0:
        return 0.0
    diff = np.abs(analytic - numeric)
    scale = np.maximum(1.0, np.abs(analytic) + np.abs(numeric))
    return float(np.max(diff / scale))


def numeric_gradient(f: Callable[[], float], x: np.ndarray, h: float = config.GRADCHECK["step"]) -> np.ndarray:
    """dL/dx by central differences; ``x`` is perturbed in place and restored."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = x[idx]
        x[idx] = original + h
        plus = f()
        x[idx] = original - h
        minus = f()
        x[idx] = original
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def _check_input(rng: np.random.Generator, kind: str, shape) -> np.ndarray:
    x = rng.standard_normal(shape)
    if kind == "relu":
        # keep every input clear of the kink at 0
        x = np.sign(x) * rng.uniform(0.1, 1.0, size=shape)
        x[x == 0] = 0.5
    return x


def gradient_check(spec: LayerSpec, input_shape: Sequence[int], seed: int, h: float = config.GRADCHECK["step"]) -> float:
    """Max relative error between the analytic and numeric gradients of one layer."""
    rng = np.random.default_rng(seed)
    dtype = np.dtype(config.CHECK_DTYPE)
    layer = build_layer(spec, tuple(input_shape), rng, dtype)
    if layer.params is not None and layer.params.bias is not None:
        layer.params.bias[...] = rng.standard_normal(layer.params.bias.shape)

    x = _check_input(rng, spec.kind, (CHECK_BATCH,) + tuple(input_shape)).astype(dtype)
    out = layer.forward(x)
    projection = rng.standard_normal(out.shape)
    grad_x = layer.backward(projection)

    def loss() -> float:
        return float(np.sum(layer.forward(x) * projection))

    errors = [relative_error(grad_x, numeric_gradient(loss, x, h))]
    if layer.params is not None:
        grad_w, grad_b = layer.grads
        errors.append(relative_error(grad_w, numeric_gradient(loss, layer.params.weights, h)))
        if grad_b is not None:
            errors.append(relative_error(grad_b, numeric_gradient(loss, layer.params.bias, h)))
    return max(errors)


def softmax_crossentropy_check(num_classes: int, seed: int, h: float = config.GRADCHECK["step"]) -> float:
    """The combined (p - onehot) / b gradient against differences through softmax + CE."""
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((CHECK_BATCH + 2, num_classes))
    labels = rng.integers(0, num_classes, size=len(logits))
    _, analytic = categorical_crossentropy(softmax(logits), labels)

    def loss() -> float:
        return categorical_crossentropy(softmax(logits), labels)[0]

    return relative_error(analytic, numeric_gradient(loss, logits, h))


def mse_check(shape: Sequence[int], seed: int, h: float = config.GRADCHECK["step"]) -> float:
    rng = np.random.default_rng(seed)
    x_hat = rng.uniform(size=tuple(shape))
    x = rng.uniform(size=tuple(shape))
    _, analytic = mse_loss(x_hat, x)

    def loss() -> float:
        return mse_loss(x_hat, x)[0]

    return relative_error(analytic, numeric_gradient(loss, x_hat, h))


def default_cases() -> List[GradcheckCase]:
    tol = config.GRADCHECK["tolerance"]
    tight = config.GRADCHECK["tight_tolerance"]
    return [
        GradcheckCase("dense", LayerSpec("dense", name="dense", units=5), (3,), tight),
        GradcheckCase(
            "conv2d_s2",
            LayerSpec("conv2d", name="conv2d_s2", filters=3, kernel=(3, 3), stride=2),
            (6, 6, 2),
            tol,
        ),
        GradcheckCase(
            "conv2d_5x5_s2",
            LayerSpec("conv2d", name="conv2d_5x5_s2", filters=2, kernel=(5, 5), stride=2),
            (7, 7, 2),
            tol,
        ),
        GradcheckCase(
            "conv2d_transpose_s2",
            LayerSpec("conv2d_transpose", name="conv2d_transpose_s2", filters=3, kernel=(3, 3), stride=2),
            (3, 3, 2),
            tol,
        ),
        GradcheckCase("relu", LayerSpec("relu", name="relu"), (6,), tol),
        GradcheckCase("sigmoid", LayerSpec("sigmoid", name="sigmoid"), (6,), tol),
        GradcheckCase("softmax", LayerSpec("softmax", name="softmax"), (5,), tol),
        GradcheckCase("softmax_crossentropy", None, (4,), tight),
        GradcheckCase("mse", None, (3, 4), tight),
    ]


def run_case(case: GradcheckCase, seed: int) -> GradcheckResult:
    if case.name == "softmax_crossentropy":
        error = softmax_crossentropy_check(case.input_shape[0], seed)
    elif case.name == "mse":
        error = mse_check(case.input_shape, seed)
    else:
        error = gradient_check(case.spec, case.input_shape, seed)
    return GradcheckResult(case.name, seed, error, case.tolerance)


def run_gradcheck_suite(seeds: int = config.GRADCHECK["seeds"], logger=None) -> List[GradcheckResult]:
    """Every case over seeds 0..seeds-1; one summary line per case."""
    results = []
    for case in default_cases():
        case_results = [run_case(case, seed) for seed in range(seeds)]
        results.extend(case_results)
        worst = max(r.max_error for r in case_results)
        failed = sum(not r.passed for r in case_results)
        if logger:
            status = "PASS" if failed == 0 else f"FAIL ({failed}/{seeds} seeds)"
            logger.log(
                f"gradcheck {case.name:<22} max rel. error {worst:.3e} (tol {case.tolerance:.0e}) {status}",
                level="INFO" if failed == 0 else "ERROR",
            )
    return results
