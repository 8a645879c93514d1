"""
Adam with bias correction and the step-decay learning-rate schedule.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from csae import config
from csae.errors import NonFiniteGradientError, TensorShapeError
from csae.layers.base import Layer, LayerParams
from csae.tensor import all_finite

Grads = Tuple[np.ndarray, Optional[np.ndarray]]


@dataclass
class LrSchedule:
    base: float = config.LR_SCHEDULE["base"]
    decay_factor: float = config.LR_SCHEDULE["decay_factor"]
    period_epochs: int = config.LR_SCHEDULE["period_epochs"]


def lr_at_epoch(schedule: LrSchedule, epoch: int) -> float:
    """base * decay_factor ** floor(epoch / period); epochs count from 0."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return schedule.base * schedule.decay_factor ** (epoch // schedule.period_epochs)


@dataclass
class AdamState:
    alpha: float = config.LR_SCHEDULE["base"]
    beta1: float = config.ADAM["beta1"]
    beta2: float = config.ADAM["beta2"]
    epsilon: float = config.ADAM["epsilon"]
    t: int = 0


def _check_grads(params: LayerParams, grads: Grads):
    grad_w, grad_b = grads
    if grad_w.shape != params.weights.shape:
        raise TensorShapeError(f"Weight gradient {grad_w.shape} != weights {params.weights.shape}")
    if (grad_b is None) != (params.bias is None):
        raise TensorShapeError("Bias gradient present/absent mismatch with bias parameter")
    if grad_b is not None and grad_b.shape != params.bias.shape:
        raise TensorShapeError(f"Bias gradient {grad_b.shape} != bias {params.bias.shape}")


def _adam_update(param, m, v, g, state: AdamState):
    m *= state.beta1
    m += (1.0 - state.beta1) * g
    v *= state.beta2
    v += (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1 ** state.t)
    v_hat = v / (1.0 - state.beta2 ** state.t)
    param -= state.alpha * m_hat / (np.sqrt(v_hat) + state.epsilon)


class MomentSlots:
    """First and second moments of one parameter set, owned by one optimizer."""

    def __init__(self, params: LayerParams):
        self.m_weights = np.zeros_like(params.weights)
        self.v_weights = np.zeros_like(params.weights)
        self.m_bias = None if params.bias is None else np.zeros_like(params.bias)
        self.v_bias = None if params.bias is None else np.zeros_like(params.bias)


def apply_adam(params: LayerParams, grads: Grads, state: AdamState, moments=None):
    """
    Update one parameter set in place at the current step ``state.t``. The
    moments default to the buffers stored in ``params``.
    """
    moments = params if moments is None else moments
    grad_w, grad_b = grads
    _adam_update(params.weights, moments.m_weights, moments.v_weights, grad_w, state)
    if grad_b is not None:
        _adam_update(params.bias, moments.m_bias, moments.v_bias, grad_b, state)


def adam_step(params: LayerParams, grads: Grads, state: AdamState) -> Tuple[LayerParams, AdamState]:
    """Single-parameter-set Adam step: validates, increments t, updates in place."""
    _check_grads(params, grads)
    if not all_finite(*grads):
        raise NonFiniteGradientError("Non-finite gradient passed to Adam")
    state.t += 1
    apply_adam(params, grads, state)
    return params, state


class Adam:
    """
    One optimizer over a group of layers. ``step`` counts as a single Adam
    step (t += 1) however many layers it touches.

    Each instance keeps its own moment slots per parameter set, so two
    optimizers over a shared encoder never mix their histories.
    """

    def __init__(self, state: Optional[AdamState] = None, name: str = "adam"):
        self.state = state or AdamState()
        self.name = name
        # id(params) -> (params, slots); holding params pins the id
        self._slots: Dict[int, Tuple[LayerParams, MomentSlots]] = {}

    def moments(self, params: LayerParams) -> MomentSlots:
        key = id(params)
        if key not in self._slots:
            self._slots[key] = (params, MomentSlots(params))
        return self._slots[key][1]

    def set_learning_rate(self, alpha: float):
        self.state.alpha = alpha

    def step(self, layers: Iterable[Layer]):
        updates = [(layer, layer.grads) for layer in layers if layer.trainable]
        for layer, grads in updates:
            if grads is None:
                raise RuntimeError(f"{self.name}: layer {layer.name} has no gradients")
            _check_grads(layer.params, grads)
            if not all_finite(*grads):
                raise NonFiniteGradientError(f"{self.name}: non-finite gradient in layer {layer.name}")

        self.state.t += 1
        for layer, grads in updates:
            apply_adam(layer.params, grads, self.state, self.moments(layer.params))
