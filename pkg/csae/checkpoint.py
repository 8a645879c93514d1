"""
Binary checkpoint format, version 1 (little-endian):

    "CSAE" | u32 version | u32 tensor count
    per tensor: u32 name length | UTF-8 name | u32 rank | rank x u64 dims | f32 values

Only parameters are stored. The architecture is recovered from the tensor
names and shapes.
"""

import math
import struct
from pathlib import Path
from typing import Dict

import numpy as np

from csae import config
from csae.errors import BadMagicError, FileFormatError, TruncatedFileError, VersionMismatchError
from csae.network import CsaeModel, build_csae, make_preset


def save_checkpoint(model: CsaeModel, path, logger=None) -> Path:
    path = Path(path)
    tensors = list(model.named_tensors())
    chunks = [struct.pack("<4sII", config.CHECKPOINT["magic"], config.CHECKPOINT["version"], len(tensors))]
    for name, tensor in tensors:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<I{tensor.ndim}Q", tensor.ndim, *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    if logger:
        logger.log(f"Saved checkpoint ({len(tensors)} tensors) to: {path}")
    return path


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise TruncatedFileError(
                f"{self.source}: truncated while reading {what} "
                f"(need {n} bytes at offset {self.offset}, file has {len(self.data)})"
            )
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_tensors(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    reader = _Reader(path.read_bytes(), str(path))

    magic = reader.data[:4]
    if len(magic) == 4 and magic != config.CHECKPOINT["magic"]:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {config.CHECKPOINT['magic']!r}")
    reader.take(4, "magic")
    (version,) = reader.unpack("<I", "version")
    if version != config.CHECKPOINT["version"]:
        raise VersionMismatchError(
            f"{path}: checkpoint version {version}, this build reads version {config.CHECKPOINT['version']}"
        )
    (count,) = reader.unpack("<I", "tensor count")

    tensors = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<I", "name length")
        raw_name = reader.take(name_len, "tensor name")
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError:
            raise FileFormatError(f"{path}: tensor name at offset {reader.offset - name_len} is not UTF-8") from None
        (rank,) = reader.unpack("<I", f"rank of {name}")
        # dims are bounds-checked before unpacking, sizes use Python ints
        dims = struct.unpack(f"<{rank}Q", reader.take(8 * rank, f"dims of {name}"))
        size = math.prod(dims)
        if 4 * size > len(reader.data) - reader.offset:
            raise TruncatedFileError(
                f"{path}: {name} declares shape {dims} ({size} values), "
                f"only {len(reader.data) - reader.offset} bytes remain"
            )
        values = np.frombuffer(reader.take(4 * size, f"values of {name}"), dtype="<f4")
        tensors[name] = values.reshape(dims).astype(np.float32)

    if reader.offset != len(reader.data):
        raise FileFormatError(f"{path}: {len(reader.data) - reader.offset} trailing bytes after last tensor")
    return tensors


def infer_preset(tensors: Dict[str, np.ndarray]):
    """Recover the architecture preset from canonical tensor names and shapes."""
    filters, kernels = [], []
    while f"enc.conv{len(filters)}.w" in tensors:
        kernel = tensors[f"enc.conv{len(filters)}.w"]
        if kernel.ndim != 4:
            raise FileFormatError(f"Checkpoint tensor enc.conv{len(filters)}.w has rank {kernel.ndim}, expected 4")
        kernels.append(kernel.shape[0])
        filters.append(kernel.shape[3])

    for name, raw in config.ARCH_PRESETS.items():
        if raw["conv_filters"] == filters and raw["conv_kernels"] == kernels:
            break
    else:
        raise FileFormatError(f"Checkpoint conv stack filters={filters} kernels={kernels} matches no preset")

    widths = []
    for key in ("enc.fc2.w", "cls.out.w"):
        if key not in tensors:
            raise FileFormatError(f"Checkpoint is missing tensor '{key}'")
        if tensors[key].ndim != 2:
            raise FileFormatError(f"Checkpoint tensor {key} has rank {tensors[key].ndim}, expected 2")
        widths.append(tensors[key].shape[1])
    latent_dim, num_classes = widths
    return make_preset(name, latent_dim, num_classes, conv_bias="enc.conv0.b" in tensors)


def load_checkpoint(path, logger=None) -> CsaeModel:
    tensors = read_tensors(path)
    model = build_csae(infer_preset(tensors), seed=0)

    expected = dict(model.named_tensors())
    missing = sorted(set(expected) - set(tensors))
    unexpected = sorted(set(tensors) - set(expected))
    if missing or unexpected:
        raise FileFormatError(f"{path}: missing tensors {missing}, unexpected tensors {unexpected}")
    for name, target in expected.items():
        if tensors[name].shape != target.shape:
            raise FileFormatError(f"{path}: {name} has shape {tensors[name].shape}, expected {target.shape}")
        target[...] = tensors[name]

    if logger:
        logger.log(
            f"Loaded checkpoint {path}: preset {model.preset.name}, "
            f"lambda={model.latent_dim}, classes={model.num_classes}"
        )
    return model
