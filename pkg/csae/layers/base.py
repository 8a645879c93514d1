from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np

Shape = Tuple[int, ...]


@dataclass(frozen=True)
class LayerSpec:
    """
    Declarative description of one layer.

    kind is one of dense, conv2d, conv2d_transpose, relu, sigmoid, softmax,
    linear, flatten, reshape. Shapes exclude the batch axis.
    """

    kind: str
    name: str = ""
    units: Optional[int] = None
    filters: Optional[int] = None
    kernel: Optional[Tuple[int, int]] = None
    stride: int = 1
    padding: str = "same"
    use_bias: bool = True
    target_shape: Optional[Shape] = None


@dataclass
class LayerParams:
    """Weights, bias and their Adam moment buffers (always shape-identical)."""

    weights: np.ndarray
    bias: Optional[np.ndarray] = None
    m_weights: np.ndarray = field(init=False)
    v_weights: np.ndarray = field(init=False)
    m_bias: Optional[np.ndarray] = field(init=False)
    v_bias: Optional[np.ndarray] = field(init=False)

    def __post_init__(self):
        self.reset_moments()

    def reset_moments(self):
        self.m_weights = np.zeros_like(self.weights)
        self.v_weights = np.zeros_like(self.weights)
        self.m_bias = None if self.bias is None else np.zeros_like(self.bias)
        self.v_bias = None if self.bias is None else np.zeros_like(self.bias)

    def named_tensors(self) -> Iterator[Tuple[str, np.ndarray]]:
        yield "w", self.weights
        if self.bias is not None:
            yield "b", self.bias

    @property
    def size(self) -> int:
        return sum(int(t.size) for _, t in self.named_tensors())


def glorot_uniform(rng: np.random.Generator, shape: Shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer(ABC):
    """
    Abstract base class for all network layers.

    forward() caches what backward() needs; backward() returns the input
    gradient and leaves parameter gradients in ``self.grads`` as
    (grad_w, grad_b). Parameters are never modified here.
    """

    def __init__(self, spec: LayerSpec, params: Optional[LayerParams] = None):
        self.spec = spec
        self.name = spec.name or spec.kind
        self.params = params
        self.grads: Optional[Tuple[np.ndarray, Optional[np.ndarray]]] = None
        self._cache = None

    @classmethod
    def build(cls, spec: LayerSpec, input_shape: Shape, rng: np.random.Generator, dtype) -> "Layer":
        """Create the layer for inputs of per-sample ``input_shape``."""
        return cls(spec)

    @abstractmethod
    def output_shape(self, input_shape: Shape) -> Shape:
        pass

    @abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        pass

    @property
    def trainable(self) -> bool:
        return self.params is not None

    def parameter_count(self) -> int:
        return self.params.size if self.params is not None else 0

    def clear_cache(self):
        self._cache = None
        self.grads = None

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward() called before forward()")
        return self._cache

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name})"


def trainable_layers(layers: List[Layer]) -> List[Layer]:
    return [layer for layer in layers if layer.trainable]
