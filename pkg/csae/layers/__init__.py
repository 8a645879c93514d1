from importlib import import_module

from csae.errors import ConfigError
from csae.layers.base import Layer, LayerParams, LayerSpec

LAYER_KINDS = {
    "dense": ("dense", "Dense"),
    "conv2d": ("conv", "Conv2D"),
    "conv2d_transpose": ("conv", "Conv2DTranspose"),
    "relu": ("activations", "Activation"),
    "sigmoid": ("activations", "Activation"),
    "softmax": ("activations", "Activation"),
    "linear": ("activations", "Activation"),
    "flatten": ("reshape", "Flatten"),
    "reshape": ("reshape", "Reshape"),
}


def build_layer(spec: LayerSpec, input_shape, rng, dtype) -> Layer:
    """Instantiate the layer class registered for ``spec.kind``."""
    if spec.kind not in LAYER_KINDS:
        raise ConfigError(f"Unknown layer kind '{spec.kind}'. Available: {list(LAYER_KINDS)}")
    module_name, class_name = LAYER_KINDS[spec.kind]
    module = import_module(f"csae.layers.{module_name}")
    return getattr(module, class_name).build(spec, tuple(input_shape), rng, dtype)


__all__ = ["Layer", "LayerParams", "LayerSpec", "LAYER_KINDS", "build_layer"]
