"""
CSAE assembly: encoder, mirrored decoder and a classifier head on the latent code.

    encoder:    [conv s2 + relu] x n -> flatten -> fc 128 relu -> fc 128 relu -> fc lambda linear
    decoder:    fc 128 relu -> fc 128 relu -> fc flat relu -> reshape -> [tconv s2] x n -> sigmoid
    classifier: fc 128 relu -> fc 128 relu -> fc k softmax
"""

import copy
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from csae import config
from csae.errors import ConfigError, TensorShapeError
from csae.layers import Layer, LayerParams, LayerSpec, build_layer
from csae.tensor import resolve_dtype


@dataclass(frozen=True)
class ArchPreset:
    name: str
    input_side: int
    conv_filters: Tuple[int, ...]
    conv_kernels: Tuple[int, ...]
    latent_dim: int
    num_classes: int
    conv_bias: bool = True

    @property
    def flat_side(self) -> int:
        side = self.input_side
        for _ in self.conv_filters:
            side = -(-side // config.CONV_STRIDE)
        return side


def make_preset(name: str, latent_dim: int, num_classes: int, conv_bias: bool = True) -> ArchPreset:
    if name not in config.ARCH_PRESETS:
        raise ConfigError(f"Unknown preset '{name}'. Available: {list(config.ARCH_PRESETS)}")
    if latent_dim < 1:
        raise ConfigError(f"Latent dimension must be >= 1, got {latent_dim}")
    if num_classes < 2:
        raise ConfigError(f"At least two classes are required, got {num_classes}")
    raw = config.ARCH_PRESETS[name]
    return ArchPreset(
        name=name,
        input_side=raw["input_side"],
        conv_filters=tuple(raw["conv_filters"]),
        conv_kernels=tuple(raw["conv_kernels"]),
        latent_dim=latent_dim,
        num_classes=num_classes,
        conv_bias=conv_bias,
    )


@dataclass
class CsaeModel:
    preset: ArchPreset
    encoder: List[Layer]
    decoder: List[Layer]
    classifier: List[Layer]
    dtype: np.dtype

    @property
    def latent_dim(self) -> int:
        return self.preset.latent_dim

    @property
    def num_classes(self) -> int:
        return self.preset.num_classes

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return (self.preset.input_side, self.preset.input_side, 1)

    @property
    def classifier_logits(self) -> List[Layer]:
        """Classifier layers without the final softmax."""
        return self.classifier[:-1]

    def sections(self) -> Dict[str, List[Layer]]:
        return {"encoder": self.encoder, "decoder": self.decoder, "classifier": self.classifier}

    def named_parameters(self) -> Iterator[Tuple[str, LayerParams]]:
        for layers in self.sections().values():
            for layer in layers:
                if layer.trainable:
                    yield layer.name, layer.params

    def named_tensors(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name, params in self.named_parameters():
            for suffix, tensor in params.named_tensors():
                yield f"{name}.{suffix}", tensor

    def clear_caches(self):
        for layers in self.sections().values():
            for layer in layers:
                layer.clear_cache()

    def snapshot(self) -> "CsaeModel":
        """Deep copy of the weights, detached from any forward/backward state."""
        self.clear_caches()
        return copy.deepcopy(self)


def _stack(specs: List[LayerSpec], input_shape, rng, dtype) -> Tuple[List[Layer], tuple]:
    layers, shape = [], tuple(input_shape)
    for spec in specs:
        layer = build_layer(spec, shape, rng, dtype)
        shape = layer.output_shape(shape)
        layers.append(layer)
    return layers, shape


def _dense(name: str, units: int, activation: str) -> List[LayerSpec]:
    return [LayerSpec("dense", name=name, units=units), LayerSpec(activation, name=f"{name}.{activation}")]


def encoder_specs(preset: ArchPreset) -> List[LayerSpec]:
    specs = []
    for i, (filters, kernel) in enumerate(zip(preset.conv_filters, preset.conv_kernels)):
        specs += [
            LayerSpec(
                "conv2d",
                name=f"enc.conv{i}",
                filters=filters,
                kernel=(kernel, kernel),
                stride=config.CONV_STRIDE,
                use_bias=preset.conv_bias,
            ),
            LayerSpec("relu", name=f"enc.conv{i}.relu"),
        ]
    specs.append(LayerSpec("flatten", name="enc.flatten"))
    specs += _dense("enc.fc0", config.DENSE_UNITS, "relu")
    specs += _dense("enc.fc1", config.DENSE_UNITS, "relu")
    specs += _dense("enc.fc2", preset.latent_dim, "linear")
    return specs


def decoder_specs(preset: ArchPreset) -> List[LayerSpec]:
    side = preset.flat_side
    channels = (1,) + preset.conv_filters
    n = len(preset.conv_filters)

    specs = []
    specs += _dense("dec.fc0", config.DENSE_UNITS, "relu")
    specs += _dense("dec.fc1", config.DENSE_UNITS, "relu")
    specs += _dense("dec.fc2", side * side * channels[-1], "relu")
    specs.append(LayerSpec("reshape", name="dec.reshape", target_shape=(side, side, channels[-1])))
    for j in range(n):
        mirrored = n - 1 - j
        kernel = preset.conv_kernels[mirrored]
        activation = "sigmoid" if j == n - 1 else "relu"
        specs += [
            LayerSpec(
                "conv2d_transpose",
                name=f"dec.tconv{j}",
                filters=channels[mirrored],
                kernel=(kernel, kernel),
                stride=config.CONV_STRIDE,
                use_bias=preset.conv_bias,
            ),
            LayerSpec(activation, name=f"dec.tconv{j}.{activation}"),
        ]
    return specs


def classifier_specs(preset: ArchPreset) -> List[LayerSpec]:
    return (
        _dense("cls.fc0", config.DENSE_UNITS, "relu")
        + _dense("cls.fc1", config.DENSE_UNITS, "relu")
        + _dense("cls.out", preset.num_classes, "softmax")
    )


def build_csae(preset: ArchPreset, seed: int, dtype=None) -> CsaeModel:
    """
    Build a freshly initialized CSAE: Glorot-uniform weights from a seeded
    generator, zero biases. The same seed yields bitwise identical weights.
    """
    if preset.input_side % (config.CONV_STRIDE ** len(preset.conv_filters)) != 0:
        raise ConfigError(
            f"Input side {preset.input_side} is not divisible by the total stride of "
            f"{len(preset.conv_filters)} conv layers"
        )
    dtype = resolve_dtype(dtype)
    rng = np.random.default_rng(seed)
    input_shape = (preset.input_side, preset.input_side, 1)

    encoder, latent_shape = _stack(encoder_specs(preset), input_shape, rng, dtype)
    decoder, output_shape = _stack(decoder_specs(preset), latent_shape, rng, dtype)
    classifier, _ = _stack(classifier_specs(preset), latent_shape, rng, dtype)
    if output_shape != input_shape:
        raise ConfigError(f"Decoder output {output_shape} does not mirror input {input_shape}")
    return CsaeModel(preset, encoder, decoder, classifier, dtype)


def forward(layers: List[Layer], x: np.ndarray) -> np.ndarray:
    for layer in layers:
        x = layer.forward(x)
    return x


def backward(layers: List[Layer], grad: np.ndarray) -> np.ndarray:
    for layer in reversed(layers):
        grad = layer.backward(grad)
    return grad


def batched(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, batch_size: Optional[int]) -> np.ndarray:
    if not batch_size or len(x) <= batch_size:
        return fn(x)
    return np.concatenate([fn(x[i:i + batch_size]) for i in range(0, len(x), batch_size)])


def _check_images(model: CsaeModel, x: np.ndarray) -> np.ndarray:
    if x.ndim != 4 or tuple(x.shape[1:]) != model.input_shape:
        raise TensorShapeError(f"Expected images [batch, {model.input_shape}], got {x.shape}")
    return x.astype(model.dtype, copy=False)


def _check_latents(model: CsaeModel, z: np.ndarray) -> np.ndarray:
    if z.ndim != 2 or z.shape[1] != model.latent_dim:
        raise TensorShapeError(f"Expected latents [batch, {model.latent_dim}], got {z.shape}")
    return z.astype(model.dtype, copy=False)


def encode(model: CsaeModel, x: np.ndarray, batch_size: Optional[int] = None) -> np.ndarray:
    x = _check_images(model, x)
    return batched(lambda xb: forward(model.encoder, xb), x, batch_size)


def decode(model: CsaeModel, z: np.ndarray, batch_size: Optional[int] = None) -> np.ndarray:
    z = _check_latents(model, z)
    return batched(lambda zb: forward(model.decoder, zb), z, batch_size)


def classify_latent(model: CsaeModel, z: np.ndarray, batch_size: Optional[int] = None) -> np.ndarray:
    z = _check_latents(model, z)
    return batched(lambda zb: forward(model.classifier, zb), z, batch_size)


def classify(model: CsaeModel, x: np.ndarray, batch_size: Optional[int] = None) -> np.ndarray:
    """Softmax class probabilities; the head sees only the latent code."""
    x = _check_images(model, x)
    return batched(lambda xb: forward(model.classifier, forward(model.encoder, xb)), x, batch_size)


def count_parameters(model: CsaeModel) -> Dict[str, int]:
    counts = {
        section: sum(layer.parameter_count() for layer in layers)
        for section, layers in model.sections().items()
    }
    counts["deployed"] = counts["encoder"] + counts["classifier"]
    counts["total"] = counts["encoder"] + counts["decoder"] + counts["classifier"]
    return counts


def deployed_parameters(model: CsaeModel) -> int:
    """Parameters needed to classify: encoder plus head, no decoder."""
    return count_parameters(model)["deployed"]
