"""
Dataset ingestion and preparation: IDX reader/writer, [0, 1] normalization,
nearest-neighbor resizing, seeded splits and the latent CSV tables.
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from csae import config
from csae.errors import (
    BadMagicError,
    ConfigError,
    CountMismatchError,
    DataRangeError,
    EmptyDatasetError,
    FileFormatError,
    TensorShapeError,
    TruncatedFileError,
)

GZIP_MAGIC = b"\x1f\x8b"


@dataclass
class RawDataset:
    """Images [n, h, w, 1] holding byte values 0..255, and integer labels [n]."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)


@dataclass
class LabeledDataset:
    """Prepared images (normalized or standardized) paired with class labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0

    def take(self, indices) -> "LabeledDataset":
        return LabeledDataset(self.images[indices], self.labels[indices])


@dataclass
class LatentDataset:
    """Feature rows z [n, d] (latent codes or flattened pixels) and optional labels."""

    z: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.z.ndim != 2:
            raise TensorShapeError(f"Latent features must be [n, d], got {self.z.shape}")
        if self.y is not None and len(self.y) != len(self.z):
            raise CountMismatchError(f"{len(self.z)} feature rows but {len(self.y)} labels")

    def __len__(self):
        return len(self.z)


@dataclass(frozen=True)
class SplitSpec:
    val_fraction: float = config.SPLITS["val_fraction"]
    test_fraction: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        fractions = [f for f in (self.val_fraction, self.test_fraction) if f is not None]
        if any(not 0 < f < 1 for f in fractions) or sum(fractions) >= 1:
            raise ConfigError(f"Split fractions must lie in (0, 1) and sum below 1, got {fractions}")


# ----------------------------------------------------------------------
# IDX format
# ----------------------------------------------------------------------

def _read_maybe_gzip(path: Path) -> bytes:
    with path.open("rb") as f:
        head = f.read(2)
    if head == GZIP_MAGIC:
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _parse_idx(path: Path, magic: int, header_fields: int) -> Tuple[Tuple[int, ...], bytes]:
    data = _read_maybe_gzip(path)
    header_size = 4 * (1 + header_fields)
    if len(data) < 4:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise BadMagicError(f"{path}: bad magic {found} (0x{found:08x}), expected {magic} (0x{magic:08x})")
    if len(data) < header_size:
        raise TruncatedFileError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{header_fields}I", data[4:header_size])
    payload = data[header_size:]
    expected = int(np.prod(dims))
    if len(payload) < expected:
        raise TruncatedFileError(f"{path}: expected {expected} data bytes, found {len(payload)}")
    return dims, payload[:expected]


def load_idx_images(images_path) -> np.ndarray:
    """Images [n, rows, cols, 1] of an IDX image file, as float32 byte values."""
    (n_images, rows, cols), pixels = _parse_idx(Path(images_path), config.IDX["images_magic"], 3)
    return np.frombuffer(pixels, dtype=np.uint8).reshape(n_images, rows, cols, 1).astype(np.float32)


def load_idx(images_path, labels_path, logger=None) -> RawDataset:
    """Read an IDX image file (magic 2051) and its IDX label file (magic 2049)."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    images = load_idx_images(images_path)
    n_images, rows, cols = images.shape[:3]
    (n_labels,), raw_labels = _parse_idx(labels_path, config.IDX["labels_magic"], 1)
    if n_images != n_labels:
        raise CountMismatchError(
            f"{images_path} holds {n_images} images but {labels_path} holds {n_labels} labels"
        )

    labels = np.frombuffer(raw_labels, dtype=np.uint8).astype(np.int64)
    if logger:
        logger.log(f"Loaded {n_images} images of {rows}x{cols} from {images_path}")
    return RawDataset(images, labels)


def write_idx(images_path, labels_path, dataset: RawDataset):
    """Write ``dataset`` as an IDX image/label file pair; '.gz' paths are gzip-compressed."""
    n, rows, cols = dataset.images.shape[:3]
    image_bytes = struct.pack(">IIII", config.IDX["images_magic"], n, rows, cols) + np.clip(
        np.rint(dataset.images), 0, 255
    ).astype(np.uint8).tobytes()
    label_bytes = struct.pack(">II", config.IDX["labels_magic"], n) + np.asarray(
        dataset.labels, dtype=np.uint8
    ).tobytes()
    for path, payload in ((Path(images_path), image_bytes), (Path(labels_path), label_bytes)):
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix == ".gz":
            with gzip.open(path, "wb") as f:
                f.write(payload)
        else:
            path.write_bytes(payload)


# ----------------------------------------------------------------------
# Preparation
# ----------------------------------------------------------------------

def normalize01(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw)
    if raw.size and (raw.min() < 0 or raw.max() > 255):
        raise DataRangeError(f"Byte images must lie in [0, 255], got [{raw.min()}, {raw.max()}]")
    return (raw / np.float32(255.0)).astype(np.float32)


def _resize_index(source: int, target: int) -> np.ndarray:
    return (np.arange(target) * source) // target


def nn_resize(image: np.ndarray, target: Sequence[int]) -> np.ndarray:
    """Nearest-neighbor resize of one [h, w] (or [h, w, c]) image: out[i, j] = in[i*h//H, j*w//W]."""
    height, width = int(target[0]), int(target[1])
    if height < 1 or width < 1:
        raise TensorShapeError(f"Resize target must be positive, got {tuple(target)}")
    if image.ndim < 2 or image.shape[0] < 1 or image.shape[1] < 1:
        raise TensorShapeError(f"Cannot resize image of shape {image.shape}")
    rows = _resize_index(image.shape[0], height)
    cols = _resize_index(image.shape[1], width)
    return image[rows][:, cols]


def resize_images(images: np.ndarray, side: int) -> np.ndarray:
    """nn_resize applied to every image of an [n, h, w, c] batch."""
    if images.shape[1] == side and images.shape[2] == side:
        return images
    rows = _resize_index(images.shape[1], side)
    cols = _resize_index(images.shape[2], side)
    return images[:, rows][:, :, cols]


def prepare_images(raw_images: np.ndarray, side: int) -> np.ndarray:
    return normalize01(resize_images(raw_images, side))


def split(dataset, spec: SplitSpec):
    """
    Seeded random partition into (train, val) or (train, val, test). Each held-out
    part has floor(n * fraction) samples; the remainder goes to train.
    """
    n = len(dataset)
    order = np.random.default_rng(spec.seed).permutation(n)
    n_val = int(np.floor(n * spec.val_fraction))
    n_test = int(np.floor(n * spec.test_fraction)) if spec.test_fraction is not None else 0

    val_idx = order[:n_val]
    test_idx = order[n_val:n_val + n_test]
    train_idx = order[n_val + n_test:]
    sizes = {"train": len(train_idx), "val": len(val_idx)}
    if spec.test_fraction is not None:
        sizes["test"] = len(test_idx)
    empty = [part for part, size in sizes.items() if size == 0]
    if empty:
        raise EmptyDatasetError(f"Split of {n} samples leaves empty part(s): {empty}")

    parts = [dataset.take(train_idx), dataset.take(val_idx)]
    if spec.test_fraction is not None:
        parts.append(dataset.take(test_idx))
    return tuple(parts)


def subset(dataset: LabeledDataset, n: int, seed: int) -> LabeledDataset:
    """First ``n`` samples of a seeded shuffle."""
    if n < 1:
        raise ConfigError(f"Subset size must be >= 1, got {n}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    return dataset.take(order[:n])


# ----------------------------------------------------------------------
# CSV tables
# ----------------------------------------------------------------------

def write_csv_table(path, header: List[str], columns: List[np.ndarray], integer_columns=(), note=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([np.asarray(c, dtype=np.float64) for c in columns])
    fmt = ["%d" if name in integer_columns else "%.9g" for name in header]
    lines = [f"# {line}" for line in (note.splitlines() if note else [])]
    lines.append(",".join(header))
    np.savetxt(path, table, fmt=fmt, delimiter=",", header="\n".join(lines), comments="")
    return path


def read_csv_table(path) -> Tuple[List[str], np.ndarray]:
    with Path(path).open("r", encoding="utf-8") as f:
        line = f.readline()
        while line.startswith("#"):
            line = f.readline()
        header = line.strip().split(",")
        if not header or header == [""]:
            raise FileFormatError(f"{path}: missing CSV header")
        body = f.read()
    rows = [r for r in body.splitlines() if r.strip()]
    if not rows:
        return header, np.empty((0, len(header)))
    table = np.loadtxt(rows, delimiter=",", ndmin=2)
    if table.shape[1] != len(header):
        raise FileFormatError(f"{path}: {table.shape[1]} columns but header names {len(header)}")
    return header, table


def write_latent_csv(path, dataset: LatentDataset, note=None) -> Path:
    d = dataset.z.shape[1]
    header = [f"z{i}" for i in range(d)]
    columns = [dataset.z[:, i] for i in range(d)]
    if dataset.y is not None:
        header.append("label")
        columns.append(dataset.y)
    return write_csv_table(path, header, columns, integer_columns={"label"}, note=note)


def read_latent_csv(path) -> LatentDataset:
    header, table = read_csv_table(path)
    feature_cols = [i for i, name in enumerate(header) if name.startswith("z")]
    z = table[:, feature_cols].astype(np.float32)
    y = table[:, header.index("label")].astype(np.int64) if "label" in header else None
    return LatentDataset(z, y)
