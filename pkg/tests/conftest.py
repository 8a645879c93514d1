import os
from pathlib import Path

import numpy as np
import pytest

from csae.data import LabeledDataset, RawDataset, normalize01, write_idx
from csae.logger import RunLogger
from csae.network import build_csae, make_preset

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def synthetic_raw(n=60, num_classes=3, side=28, seed=0) -> RawDataset:
    """Byte images where class c is a bright 8x8 block at a class-specific spot, plus noise."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    images = rng.integers(0, 40, size=(n, side, side, 1)).astype(np.float32)
    for i, c in enumerate(labels):
        row = 2 + (c * 7) % (side - 10)
        col = 2 + (c * 11) % (side - 10)
        images[i, row:row + 8, col:col + 8, 0] = 255
    return RawDataset(images, labels.astype(np.int64))


def synthetic_dataset(n=60, num_classes=3, side=28, seed=0) -> LabeledDataset:
    raw = synthetic_raw(n, num_classes, side, seed)
    return LabeledDataset(normalize01(raw.images), raw.labels)


@pytest.fixture
def logger(tmp_path):
    return RunLogger(verbose=True, log_dir=tmp_path / "logs", report_dir=tmp_path / "reports")


@pytest.fixture
def dataset():
    return synthetic_dataset()


@pytest.fixture
def small_model():
    return build_csae(make_preset("small28", latent_dim=10, num_classes=10), seed=0)


@pytest.fixture
def model_2d():
    return build_csae(make_preset("small28", latent_dim=2, num_classes=3), seed=1)


@pytest.fixture
def idx_files(tmp_path):
    """Train/test IDX pairs of synthetic 28x28 digits (train gzip-compressed)."""
    paths = {
        "train_images": tmp_path / "train-images.gz",
        "train_labels": tmp_path / "train-labels.gz",
        "test_images": tmp_path / "test-images",
        "test_labels": tmp_path / "test-labels",
    }
    write_idx(paths["train_images"], paths["train_labels"], synthetic_raw(n=48, seed=0))
    write_idx(paths["test_images"], paths["test_labels"], synthetic_raw(n=18, seed=1))
    return paths


@pytest.fixture(scope="session")
def mnist_dir():
    root = os.environ.get("CSAE_MNIST_DIR")
    if not root:
        pytest.skip("CSAE_MNIST_DIR is not set")
    root = Path(root)
    found = {}
    for key, name in MNIST_FILES.items():
        for candidate in (root / name, root / f"{name}.gz"):
            if candidate.exists():
                found[key] = candidate
                break
        else:
            pytest.skip(f"{name} not found in {root}")
    return found
